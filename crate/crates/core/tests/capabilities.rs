use huey_core::skills::{Access, Role, ShopError, ShoppingStore};

fn store_with_home() -> ShoppingStore {
    let mut s = ShoppingStore::with_seed(9);
    s.add(&Access::Owner, "home", "bananas", None, None).unwrap();
    s
}

fn token(s: &mut ShoppingStore, access: &Access, role: Role) -> Access {
    Access::Token(s.issue(access, "home", role).unwrap().token)
}

#[test]
fn role_ladder() {
    let mut s = store_with_home();
    let read = token(&mut s, &Access::Owner, Role::Read);
    let rw = token(&mut s, &Access::Owner, Role::ReadWrite);
    let admin = token(&mut s, &Access::Owner, Role::Admin);

    assert_eq!(s.add(&read, "home", "milk", None, None), Err(ShopError::PermissionDenied));
    s.add(&rw, "home", "milk", None, None).unwrap();
    assert_eq!(s.purge(&rw, "home"), Err(ShopError::PermissionDenied));
    assert!(s.share_url(&admin, "home", 0).is_ok());
    assert_eq!(s.issue(&admin, "home", Role::AdminTransfer), Err(ShopError::PermissionDenied));
    // Tokens are scoped to their list.
    s.create_list("work").unwrap();
    assert_eq!(s.add(&rw, "work", "pens", None, None), Err(ShopError::PermissionDenied));
    assert_eq!(s.add(&Access::Token("NOPE99".into()), "home", "x", None, None), Err(ShopError::BadToken));
}

#[test]
fn admin_transfer_invalidates_every_prior_token() {
    let mut s = store_with_home();
    let before: Vec<Access> = Role::ALL.iter().map(|r| token(&mut s, &Access::Owner, *r)).collect();
    let transfer = s.issue(&Access::Owner, "home", Role::AdminTransfer).unwrap();
    for old in &before {
        let Access::Token(t) = old else { unreachable!() };
        assert_ne!(*t, transfer.token);
        assert!(s.token_info(t).unwrap().revoked);
        assert_eq!(s.add(old, "home", "milk", None, None), Err(ShopError::BadToken));
        assert_eq!(s.fetch_share(t, 0), Err(ShopError::Gone));
    }
    let fresh = s.tokens(&Access::Token(transfer.token.clone()), "home").unwrap();
    assert_eq!(fresh.len(), Role::ALL.len());
    for t in fresh.values() {
        assert!(!s.token_info(t).unwrap().revoked);
    }
    let new_rw = Access::Token(fresh[&Role::ReadWrite].clone());
    s.add(&new_rw, "home", "milk", None, None).unwrap();
    assert_eq!(s.list("home").unwrap().items.len(), 2);
}

#[test]
fn share_links_are_single_use_and_swept() {
    let mut s = store_with_home();
    s.share_ttl = 600;
    let used = s.share_url(&Access::Owner, "home", 100).unwrap();
    let expired = s.share_url(&Access::Owner, "home", 100).unwrap();
    let live = s.share_url(&Access::Owner, "home", 650).unwrap();
    let tok = |u: &str| u.rsplit('/').next().unwrap().to_string();
    assert!(used.starts_with("https://www.example.com/lists/share/"));
    assert_eq!(s.fetch_share(&tok(&used), 200).unwrap(), "1\t\tbananas\n");
    assert_eq!(s.fetch_share(&tok(&used), 201), Err(ShopError::Gone));
    assert_eq!(s.fetch_share(&tok(&expired), 700), Err(ShopError::Gone));
    assert_eq!(s.live_shares(), 3);
    assert_eq!(s.sweep(700), 2);
    assert_eq!(s.live_shares(), 1);
    assert_eq!(s.fetch_share(&tok(&live), 700).unwrap(), "1\t\tbananas\n");
    assert_eq!(s.sweep(700), 1);
}

#[test]
fn share_files_are_removed_by_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = ShoppingStore::open(dir.path()).unwrap();
    s.add(&Access::Owner, "home", "soap", None, None).unwrap();
    let url = s.share_url(&Access::Owner, "home", 0).unwrap();
    let file = dir.path().join("share").join(url.rsplit('/').next().unwrap());
    assert_eq!(std::fs::read_to_string(&file).unwrap(), "1\t\tsoap\n");
    s.fetch_share(url.rsplit('/').next().unwrap(), 1).unwrap();
    s.sweep(2);
    assert!(!file.exists());
}

#[test]
fn store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let read_token;
    {
        let mut s = ShoppingStore::open(dir.path()).unwrap();
        s.add(&Access::Owner, "home", "soap", None, None).unwrap();
        read_token = s.issue(&Access::Owner, "home", Role::Read).unwrap().token;
    }
    let s = ShoppingStore::open(dir.path()).unwrap();
    assert_eq!(s.list("home").unwrap().snapshot(), "1\t\tsoap\n");
    assert_eq!(s.token_info(&read_token).unwrap().role, Role::Read);
}
