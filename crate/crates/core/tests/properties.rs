use std::collections::BTreeMap;

use proptest::prelude::*;

use huey_core::cpf::{assert_monotone, CpfMode, Firewall, SentimentLexicon};
use huey_core::jak::{parse_jak, print_jak, JakProgram, JakStatement, JakValue};
use huey_core::lexicon::tokenize;
use huey_core::numbers::Fixed;
use huey_core::sexpr::{parse_sexpr, print_canonical, SExpr};
use huey_core::skills::{Access, Browser, CmpOp, Role, Sheet, ShoppingStore};

fn head() -> impl Strategy<Value = String> {
    "[a-z][a-z_]{0,9}"
}

fn sexpr() -> impl Strategy<Value = SExpr> {
    let leaf = prop_oneof!["[a-z0-9,.']{1,8}".prop_map(SExpr::Atom), head().prop_map(SExpr::Atom)];
    // Childless nodes print as bare atoms, so every node gets a child.
    leaf.prop_recursive(5, 48, 5, |inner| {
        (head(), prop::collection::vec(inner, 1..5)).prop_map(|(h, c)| SExpr::node(h, c))
    })
}

proptest! {
    #[test]
    fn sexpr_round_trip(t in sexpr()) {
        let text = print_canonical(&t);
        let back = parse_sexpr(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(print_canonical(&back), text);
    }

    #[test]
    fn sexpr_whitespace_is_insignificant(t in sexpr()) {
        let spaced = print_canonical(&t).replace(' ', " \n\t ").replace('(', "( ").replace(')', " )");
        prop_assert_eq!(parse_sexpr(&spaced).unwrap(), t);
    }
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z_0-9]{0,8}"
}

fn jak_value() -> impl Strategy<Value = JakValue> {
    prop_oneof![
        "[ -~\n]{0,12}".prop_map(JakValue::String),
        (0i128..10_000_000).prop_map(|h| JakValue::Number(Fixed::from_hundredths(h))),
        ident().prop_map(JakValue::Symbol),
    ]
}

fn jak_statement() -> impl Strategy<Value = JakStatement> {
    prop_oneof![
        (ident(), jak_value()).prop_map(|(name, value)| JakStatement::Set { name, value }),
        (ident(), prop::collection::vec((ident(), jak_value()), 1..5))
            .prop_map(|(name, fields)| JakStatement::SetRecord { name, fields }),
        (ident(), prop::collection::vec(ident(), 0..4)).prop_map(|(target, args)| JakStatement::Call { target, args }),
        (ident(), jak_value()).prop_map(|(name, value)| JakStatement::Constant { name, value }),
    ]
}

proptest! {
    #[test]
    fn jak_round_trip(stmts in prop::collection::vec(jak_statement(), 0..8)) {
        let p = JakProgram::new(stmts);
        let text = print_jak(&p);
        let back = parse_jak(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(print_jak(&back), text);
    }
}

proptest! {
    #[test]
    fn lexer_covers_input_and_is_deterministic(s in "[a-zA-Z0-9 ,.!?:/'-]{0,40}") {
        if let Ok(tokens) = tokenize(&s) {
            let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
            prop_assert_eq!(&joined, &s);
            let mut pos = 0;
            for t in &tokens {
                prop_assert_eq!(t.span.0, pos);
                prop_assert_eq!(&s[t.span.0..t.span.1], t.text.as_str());
                prop_assert_eq!(t.lower.clone(), t.text.to_lowercase());
                pos = t.span.1;
            }
            prop_assert_eq!(tokenize(&s).unwrap(), tokens);
        } else {
            prop_assert!(tokenize(&s).is_err());
        }
    }
}

/// Trees over the vocabulary the firewall acts on: sentiment and safety
/// words, unbounded amounts and the heads the rewrite table mentions.
fn cpf_tree() -> impl Strategy<Value = SExpr> {
    let words = prop::sample::select(vec![
        "desperately", "need", "urgently", "any", "2", "tickets", "sunday", "red", "sox", "game", "i", "the", "help",
        "emergency", "milk", "really", "want",
    ]);
    let heads = prop::sample::select(vec![
        "input", "stmt", "stmt_shop_top", "stmt_shop_search", "search_item", "bundled_item", "offer_price", "amount",
        "sentiment_literal", "subject", "search", "qty", "unit", "when", "item", "for_of", "det", "more_items",
    ]);
    let leaf = words.prop_map(SExpr::atom);
    leaf.prop_recursive(5, 40, 4, move |inner| {
        (heads.clone(), prop::collection::vec(inner, 0..4)).prop_map(|(h, c)| SExpr::node(h, c))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cpf_idempotent_and_monotone(t in cpf_tree()) {
        let fw = Firewall::new(SentimentLexicon::default_lexicon());
        let once = fw.filter(&t, CpfMode::StrongIncognito);
        prop_assert!(assert_monotone(&t, &once.filtered).is_ok());
        let twice = fw.filter(&once.filtered, CpfMode::StrongIncognito);
        prop_assert_eq!(&twice.filtered, &once.filtered);
        prop_assert!(twice.removed_words.is_empty());
        if once.safety_flag {
            prop_assert_eq!(&once.filtered, &t);
        }
        prop_assert_eq!(fw.filter(&t, CpfMode::Off).filtered, t);
    }
}

fn item_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["apples", "bananas", "milk", "eggs", "soap", "cumin", "pears"]).prop_map(str::to_string)
}

fn snapshot(s: &ShoppingStore, list: &str) -> String {
    s.list(list).map(|l| l.snapshot()).unwrap_or_default()
}

proptest! {
    #[test]
    fn add_then_delete_is_identity(start in prop::collection::vec(item_name(), 0..6), extra in item_name()) {
        let mut s = ShoppingStore::with_seed(1);
        s.create_list("home").unwrap();
        for i in &start {
            s.add(&Access::Owner, "home", i, None, None).unwrap();
        }
        prop_assume!(!start.contains(&extra));
        let before = snapshot(&s, "home");
        s.add(&Access::Owner, "home", &extra, Some(Fixed::from_int(3)), None).unwrap();
        s.delete(&Access::Owner, "home", &extra).unwrap();
        prop_assert_eq!(snapshot(&s, "home"), before);
    }

    #[test]
    fn purge_is_idempotent(items in prop::collection::vec(item_name(), 0..6)) {
        let mut s = ShoppingStore::with_seed(2);
        for i in &items {
            s.add(&Access::Owner, "home", i, None, None).unwrap();
        }
        s.create_list("home").unwrap();
        s.purge(&Access::Owner, "home").unwrap();
        let once = snapshot(&s, "home");
        s.purge(&Access::Owner, "home").unwrap();
        prop_assert_eq!(snapshot(&s, "home"), once.clone());
        prop_assert_eq!(once, "");
    }

    #[test]
    fn merge_conserves_quantities(
        a in prop::collection::vec((item_name(), 1i128..5), 0..6),
        b in prop::collection::vec((item_name(), 1i128..5), 0..6),
    ) {
        let mut s = ShoppingStore::with_seed(3);
        s.create_list("dst").unwrap();
        s.create_list("src").unwrap();
        let mut expected: BTreeMap<String, Fixed> = BTreeMap::new();
        for (list, items) in [("dst", &a), ("src", &b)] {
            for (i, q) in items {
                s.add(&Access::Owner, list, i, Some(Fixed::from_int(*q)), None).unwrap();
                *expected.entry(i.clone()).or_insert(Fixed::ZERO) += Fixed::from_int(*q);
            }
        }
        let src_before = snapshot(&s, "src");
        s.merge(&Access::Owner, "dst", &Access::Owner, "src").unwrap();
        let got: BTreeMap<String, Fixed> =
            s.list("dst").unwrap().items.iter().map(|i| (i.name.clone(), i.qty)).collect();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(snapshot(&s, "src"), src_before);
    }

    #[test]
    fn read_tokens_never_mutate(items in prop::collection::vec(item_name(), 1..5), victim in item_name()) {
        let mut s = ShoppingStore::with_seed(4);
        for i in &items {
            s.add(&Access::Owner, "home", i, None, None).unwrap();
        }
        s.create_list("other").unwrap();
        let read = Access::Token(s.issue(&Access::Owner, "home", Role::Read).unwrap().token);
        let before = snapshot(&s, "home");
        prop_assert!(s.add(&read, "home", &victim, None, None).is_err());
        prop_assert!(s.delete(&read, "home", &items[0]).is_err());
        prop_assert!(s.purge(&read, "home").is_err());
        prop_assert!(s.sort(&read, "home").is_err());
        prop_assert!(s.merge(&read, "home", &Access::Owner, "other").is_err());
        prop_assert!(s.issue(&read, "home", Role::Admin).is_err());
        prop_assert!(s.share_url(&read, "home", 0).is_err());
        prop_assert_eq!(snapshot(&s, "home"), before);
    }

    #[test]
    fn total_row_is_the_column_sum(values in prop::collection::vec(0i128..10_000_000, 1..12), limit in 0i128..10_000_000) {
        let mut csv = String::from("name,price\n");
        for (i, v) in values.iter().enumerate() {
            csv.push_str(&format!("r{i},{}\n", Fixed::from_hundredths(*v)));
        }
        let mut sheet = Sheet::from_csv("t", &csv).unwrap();
        sheet.select_column("price").unwrap();
        let total = sheet.sum_selection(None).unwrap();
        prop_assert_eq!(total, Fixed::from_hundredths(values.iter().sum()));
        prop_assert_eq!(sheet.total("price").and_then(|c| c.number()), Some(total));
        // Summing again changes nothing.
        prop_assert_eq!(sheet.sum_selection(Some("price")).unwrap(), total);
        prop_assert_eq!(sheet.rows.iter().filter(|r| r.total).count(), 1);
        let lit = Fixed::from_hundredths(limit).to_string();
        let picked = sheet.filter_rows("price", CmpOp::parse("less than").unwrap(), &lit).unwrap();
        prop_assert_eq!(picked.len(), values.iter().filter(|v| **v < limit).count());
    }

    #[test]
    fn browsing_pages_cover_matches(query in "[a-z]{1,2}") {
        let mut b = Browser::new(huey_core::skills::shopping::DEFAULT_CATALOG);
        let first = b.browse(&query);
        let total = b.matches().len();
        prop_assert_eq!(first.pages, total.div_ceil(4));
        let mut seen = Vec::new();
        let mut page = first;
        loop {
            prop_assert!(page.items.len() <= 4);
            for (n, item) in page.items.iter().enumerate() {
                prop_assert_eq!(&b.select(n + 1).unwrap(), item);
            }
            prop_assert!(b.select(page.items.len() + 1).is_err());
            prop_assert!(b.select(0).is_err());
            seen.extend(page.items.clone());
            if page.page >= page.pages {
                break;
            }
            page = b.next_page().unwrap();
        }
        prop_assert_eq!(seen, b.matches().to_vec());
    }
}
