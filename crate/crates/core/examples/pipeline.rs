//! Parse sentences with one grammar set and print the tree, the filtered
//! tree and the compiled Jak program.
//!
//!     cargo run -p huey-core --example pipeline -- root_shop "add eggs to my shopping list"

use huey_core::cpf::{CpfMode, Firewall, SentimentLexicon};
use huey_core::grammar::{load_grammar_set, parse_text, SetName};
use huey_core::jak::{print_jak, Compiler};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let Some(set) = args.get(1).and_then(|s| SetName::parse(s)) else {
        eprintln!("usage: pipeline <root_vns|root_shop|root_expense> SENTENCE...");
        std::process::exit(2);
    };
    let g = load_grammar_set(set).expect("embedded grammars load");
    let fw = Firewall::new(SentimentLexicon::default_lexicon());
    let compiler = Compiler::embedded();
    for s in &args[2..] {
        println!("{s}");
        let r = match parse_text(&g, s) {
            Ok(r) => r,
            Err(e) => {
                println!("  parse error: {e}");
                continue;
            }
        };
        println!("  tree     [{}] {}", r.matched_rule, r.tree);
        let out = fw.filter(&r.tree, CpfMode::StrongIncognito);
        println!("  filtered {} removed={:?}", out.filtered, out.removed_words);
        for (label, t) in [("plain", &r.tree), ("private", &out.filtered)] {
            match compiler.compile_any(t) {
                Ok((skill, p)) => print!("  {label} {skill:?}\n{}", print_jak(&p)),
                Err(e) => println!("  {label} compile error: {e}"),
            }
        }
    }
}
