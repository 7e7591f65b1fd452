use huey_core::svc::{model_check, AuthState, PrivilegeLevel, SvcConfig};

#[test]
fn no_shortcut_to_elevated() {
    let config = SvcConfig::default();
    let r = model_check(config, 30, 10_000);
    assert!(!r.truncated, "state space exceeded the bound: {r:?}");
    assert!(r.states <= 10_000);
    assert!(r.states > 10, "{r:?}");
    assert_eq!(r.min_credentials_to_elevated, Some(2));
    assert!(r.max_elevated_secs <= config.elevation_window_secs, "{r:?}");
}

#[test]
fn coarse_and_fine_time_steps_agree() {
    for step in [1, 60, 400] {
        let r = model_check(SvcConfig::default(), step, 10_000);
        assert!(!r.truncated, "step {step}: {r:?}");
        assert_eq!(r.min_credentials_to_elevated, Some(2), "step {step}");
    }
}

#[test]
fn tighter_windows_hold_too() {
    let config = SvcConfig { code_ttl_secs: 60, max_attempts: 1, elevation_window_secs: 30 };
    let r = model_check(config, 10, 10_000);
    assert!(!r.truncated);
    assert_eq!(r.min_credentials_to_elevated, Some(2));
    assert!(r.max_elevated_secs <= 30);
}

#[test]
fn level_order() {
    assert!(PrivilegeLevel::Elevated > PrivilegeLevel::User);
    assert_eq!(AuthState::LoggedOut.user(), None);
}
