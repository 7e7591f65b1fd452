use huey_core::cpf::{CpfMode, Firewall, SentimentLexicon};
use huey_core::grammar::{load_grammar_set, parse_text, SetName};
use huey_core::jak::{print_jak, Compiler, SkillKind};
use huey_core::sexpr::{parse_sexpr, print_canonical};

const RED_SOX_FILTERED: &str =
    "(action_shop (shop_search\n(search_item (qty 2) (unit tickets) (when Sunday)\n(item red sox game))))";
const RED_SOX_JAK: &str = r#"set(search_item, qty=2, unit="tickets", when="Sunday", item="red sox game")"#;

fn search_line(jak: &str) -> String {
    jak.lines().find(|l| l.starts_with("set(search_item")).unwrap_or_default().to_string()
}

#[test]
fn red_sox_sample() {
    let tree = parse_sexpr(RED_SOX_FILTERED).unwrap();
    let (skill, program) = Compiler::embedded().compile_any(&tree).unwrap();
    assert_eq!(skill, SkillKind::Shopping);
    assert_eq!(search_line(&print_jak(&program)), RED_SOX_JAK);
}

#[test]
fn filtered_request_compiles_to_the_sample() {
    let original = "(input (stmt (stmt_shop_top (stmt_shop_search (subject I) (search_item (search need) (qty 2) (bundled_item (unit tickets) (for_of for) (det the) (when Sunday) (item red sox game))) (offer_price (amount any)) (sentiment_literal desperately need)))))";
    let fw = Firewall::new(SentimentLexicon::default_lexicon());
    let filtered = fw.filter(&parse_sexpr(original).unwrap(), CpfMode::StrongIncognito).filtered;
    assert_eq!(filtered, parse_sexpr(RED_SOX_FILTERED).unwrap());
    let (_, program) = Compiler::embedded().compile_any(&filtered).unwrap();
    assert_eq!(search_line(&print_jak(&program)), RED_SOX_JAK);
}

#[test]
fn spoken_request_end_to_end() {
    let g = load_grammar_set(SetName::RootShop).unwrap();
    let parsed = parse_text(&g, "I desperately need 2 tickets for Sunday red sox game").unwrap();
    let fw = Firewall::new(SentimentLexicon::default_lexicon());
    let out = fw.filter(&parsed.tree, CpfMode::StrongIncognito);
    let leaves = out.filtered.leaves();
    for gone in ["desperately", "need"] {
        assert!(!leaves.contains(&gone), "{gone} in {}", print_canonical(&out.filtered));
    }
    for kept in ["2", "tickets", "sunday", "red", "sox", "game"] {
        assert!(leaves.contains(&kept), "{kept} missing");
    }
    let (_, program) = Compiler::embedded().compile_any(&out.filtered).unwrap();
    assert_eq!(
        search_line(&print_jak(&program)),
        r#"set(search_item, qty=2, unit="tickets", when="sunday", item="red sox game")"#
    );
}

#[test]
fn golden_parses() {
    let vns = load_grammar_set(SetName::RootVns).unwrap();
    let shop = load_grammar_set(SetName::RootShop).unwrap();
    assert_eq!(
        print_canonical(&parse_text(&vns, "Hi Huey, please connect to Alexander.").unwrap().tree),
        "(input (stmt (tell_assistant (meta (attn hi) (wake huey) (ignore ,)) (ignore please) (connect connect (to to)) (assistant (wake alexander)))))"
    );
    assert_eq!(
        print_canonical(&parse_text(&shop, "add bananas to shopping list").unwrap().tree),
        "(input (stmt (stmt_shop_top (stmt_shop (add_item (add_qty_item (add add) (item bananas)) more_items (to_shop_list (to to) (shoppingList shopping list)))))))"
    );
}
