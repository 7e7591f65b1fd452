//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::io::{BufRead, BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

use huey_core::cpf::{assert_monotone, CpfMode, Firewall, SentimentLexicon};
use huey_core::grammar::{load_grammar_set, parse_text, SetName};
use huey_core::jak::{print_jak, Compiler};
use huey_core::sexpr::{parse_sexpr, print_canonical, SExpr};
use huey_core::shell::{Clock, Shell, ShellSetup};
use huey_core::skills::{Access, CmpOp, Role, Sheet, SheetEngine, ShopError, ShoppingStore};
use huey_core::svc::{model_check, MemoryInbox, SecretSource, SvcConfig};
use huey_core::vns::stub::CANNED_FORECAST;
use huey_core::vns::{RegistryRecord, Tier, VnsClient};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn data(rel: &str) -> String {
    format!("{}/../core/data/{rel}", env!("CARGO_MANIFEST_DIR"))
}

/// Drop every closing paren at the end of an expression, then close what
/// is still open. Printed expressions in documents are often unbalanced at
/// the tail.
fn normalize_parens(s: &str) -> String {
    let flat = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = flat.trim_end_matches([')', ' ']);
    let depth = trimmed.chars().fold(0i32, |d, c| match c {
        '(' => d + 1,
        ')' => d - 1,
        _ => d,
    });
    format!("{trimmed}{}", ")".repeat(depth.max(0) as usize))
}

const CONNECT_PARSE: &str = "(input (stmt (tell_assistant (meta (attn hi) (wake huey) (ignore ,)) (ignore please)
(connect connect (to to)) (assistant (wake alexander))))))";
const BANANAS_PARSE: &str = "(input (stmt (stmt_shop_top (stmt_shop (add_item (add_qty_item (add add) (item bananas))
more_items (to_shop_list (to to) (shoppingList shopping list))))))";

fn c1_golden_parses() -> Outcome {
    let start = Instant::now();
    let vns = load_grammar_set(SetName::RootVns).map_err(|e| e.to_string())?;
    let shop = load_grammar_set(SetName::RootShop).map_err(|e| e.to_string())?;
    let a = print_canonical(&parse_text(&vns, "Hi Huey, please connect to Alexander.").map_err(|e| e.to_string())?.tree);
    let b = print_canonical(&parse_text(&shop, "add bananas to shopping list").map_err(|e| e.to_string())?.tree);
    ensure!(a == normalize_parens(CONNECT_PARSE), "connect parse: {a}");
    ensure!(b == normalize_parens(BANANAS_PARSE), "bananas parse: {b}");
    ensure!(parse_sexpr(&a).is_ok() && parse_sexpr(&b).is_ok(), "output is not balanced");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{took:.0?}"))
}

const RED_SOX: &str = "(input (stmt (stmt_shop_top (stmt_shop_search (subject I) (search_item (search need) (qty 2) (bundled_item (unit tickets) (for_of for) (det the) (when Sunday) (item red sox game))) (offer_price (amount any)) (sentiment_literal desperately need)))))";

fn red_sox_filtered() -> Result<SExpr, String> {
    let tree = parse_sexpr(RED_SOX).map_err(|e| e.to_string())?;
    Ok(Firewall::new(SentimentLexicon::default_lexicon()).filter(&tree, CpfMode::StrongIncognito).filtered)
}

fn c2_jak_oracle() -> Outcome {
    let expected = r#"set(search_item, qty=2, unit="tickets", when="Sunday", item="red sox game")"#;
    let (_, program) = Compiler::embedded().compile_any(&red_sox_filtered()?).map_err(|e| e.to_string())?;
    let text = print_jak(&program);
    ensure!(text.lines().next() == Some(expected), "got {text:?}");
    Ok(String::new())
}

fn cpf_tree() -> impl Strategy<Value = SExpr> {
    let words = prop::sample::select(vec![
        "desperately", "need", "urgently", "any", "2", "tickets", "sunday", "red", "sox", "game", "i", "help", "emergency",
    ]);
    let heads = prop::sample::select(vec![
        "input", "stmt", "stmt_shop_search", "search_item", "bundled_item", "offer_price", "amount", "sentiment_literal",
        "subject", "qty", "item", "when",
    ]);
    words.prop_map(SExpr::atom).prop_recursive(5, 40, 4, move |inner| {
        (heads.clone(), prop::collection::vec(inner, 0..4)).prop_map(|(h, c)| SExpr::node(h, c))
    })
}

fn c3_cpf() -> Outcome {
    let filtered = red_sox_filtered()?;
    let leaves: Vec<String> = filtered.leaves().iter().map(|w| w.to_lowercase()).collect();
    for w in ["desperately", "need", "any"] {
        ensure!(!leaves.iter().any(|l| l == w), "{w} survived: {}", print_canonical(&filtered));
    }
    for w in ["2", "tickets", "sunday", "red", "sox", "game"] {
        ensure!(leaves.iter().any(|l| l == w), "{w} lost: {}", print_canonical(&filtered));
    }
    let fw = Firewall::new(SentimentLexicon::default_lexicon());
    let mut runner = TestRunner::new(RunnerConfig { cases: 1000, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&cpf_tree(), |t| {
            let once = fw.filter(&t, CpfMode::StrongIncognito).filtered;
            prop_assert!(assert_monotone(&t, &once).is_ok());
            prop_assert_eq!(fw.filter(&once, CpfMode::StrongIncognito).filtered, once);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 random trees".into())
}

fn panel(sh: &Shell) -> String {
    let sheet = sh.engines().engine::<SheetEngine>("sheetHandler").and_then(|e| e.sheet());
    sheet.map(|s| s.render().lines().map(str::trim_end).collect::<Vec<_>>().join("\n")).unwrap_or_default()
}

fn expense_panel(row4: &str, total: &str) -> String {
    [
        "\tA\tB\tC\tD",
        "1\tCategory\tDescription\tDate\tAmount",
        "2\tairfare",
        "3\tlodging",
        row4,
        "5\tground transportation",
        "6\tmeals",
        "7\tother",
        total,
    ]
    .join("\n")
}

fn c4_spreadsheets() -> Outcome {
    let csv = std::fs::read_to_string(data("vehicles.csv")).map_err(|e| e.to_string())?;
    let mut sheet = Sheet::from_csv("vehicles", &csv).map_err(|e| e.to_string())?;
    sheet.select_column("price").map_err(|e| e.to_string())?;
    let total = sheet.sum_selection(None).map_err(|e| e.to_string())?;
    ensure!(total.to_string() == "17699", "TOTAL {total}");
    let picked = sheet.filter_rows("price", CmpOp::parse("less than").unwrap(), "5000").map_err(|e| e.to_string())?;
    ensure!(picked.len() == 3, "selected {picked:?}");

    let mut sh = Shell::new(ShellSetup { clock: Clock::manual(1), ..ShellSetup::default() }).map_err(|e| e.to_string())?;
    let say = |sh: &mut Shell, line: &str| -> Result<(), String> {
        let r = sh.repl_step(line);
        ensure!(!r.is_error(), "{line:?} -> {}", r.text);
        Ok(())
    };
    for line in ["hi sigma", "please create a new spreadsheet using the travel expenses template", "add an expense for lodging"] {
        say(&mut sh, line)?;
    }
    let steps = [
        (None, "4\tlodging", "8\tTOTAL"),
        (Some("now set the description to hotel"), "4\tlodging\thotel", "8\tTOTAL"),
        (Some("the date is june first"), "4\tlodging\thotel\t6/1/2020", "8\tTOTAL"),
        (Some("the amount was two hundred dollars"), "4\tlodging\thotel\t6/1/2020\t200.00", "8\tTOTAL\t\t\t200.00"),
        (Some("and fifty seven cents"), "4\tlodging\thotel\t6/1/2020\t200.57", "8\tTOTAL\t\t\t200.57"),
    ];
    for (line, row4, total) in steps {
        if let Some(line) = line {
            say(&mut sh, line)?;
        }
        let got = panel(&sh);
        ensure!(got == expense_panel(row4, total), "after {line:?}:\n{got}");
    }
    Ok("TOTAL 17699, 3 rows, 200.00 then 200.57".into())
}

/// The reference session, without the command line and banner.
const TRANSCRIPT: &str = "huey> login harry
Hello harry!
huey>
huey> :t
Verbosity set to: TRACE
huey> Hi Huey, please connect to Alexander.
OK
(input (stmt (tell_assistant (meta (attn hi) (wake huey) (ignore ,)) (ignore please)
(connect connect (to to)) (assistant (wake alexander))))))
huey> :f
FRAME
Awake: true
Interpreter: VNSInterpreter
Last command: Hi Huey, please switch to Alexander.
Last verb: connect

huey> add bananas to shopping list
[OK]
(input (stmt (stmt_shop_top (stmt_shop (add_item (add_qty_item (add add) (item bananas))
more_items (to_shop_list (to to) (shoppingList shopping list))))))
huey> :f
FRAME
Awake: true
Interpreter: ShoppingInterpreter
Last command: add bananas to shopping list
Last verb: add
Last object: bananas
";

/// Trim line ends, join wrapped s-expressions and normalize their parens.
fn normalize_transcript(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut open: Option<String> = None;
    for line in text.lines().map(str::trim_end) {
        let continues = !line.starts_with("huey>") && line.contains(['(', ')']);
        if let Some(acc) = open.as_mut().filter(|_| continues) {
            acc.push(' ');
            acc.push_str(line);
        } else if line.starts_with('(') {
            out.extend(open.take().map(|acc| normalize_parens(&acc)));
            open = Some(line.to_string());
        } else {
            out.extend(open.take().map(|acc| normalize_parens(&acc)));
            out.push(line.to_string());
            continue;
        }
        let acc = open.as_ref().unwrap();
        let depth: i32 = acc.chars().map(|c| (c == '(') as i32 - (c == ')') as i32).sum();
        if depth <= 0 {
            out.push(normalize_parens(acc));
            open = None;
        }
    }
    out.extend(open.map(|acc| normalize_parens(&acc)));
    out
}

const HUEY: &str = env!("CARGO_BIN_EXE_huey");

fn c5_transcript() -> Outcome {
    let script = "login harry\n\n:t\nHi Huey, please connect to Alexander.\n:f\nadd bananas to shopping list\n:f\n";
    let mut child = Command::new(HUEY)
        .arg("--echo")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child.stdin.take().unwrap().write_all(script.as_bytes()).map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines: Vec<&str> = text.lines().collect();
    ensure!(lines.first() == Some(&"Huey Shell"), "no banner");
    let banner = lines.iter().position(|l| l.starts_with("Type :h")).ok_or("banner incomplete")?;
    lines.drain(..=banner);
    // End of input leaves one last bare prompt.
    ensure!(lines.last().map(|l| l.trim_end()) == Some("huey>"), "no final prompt");
    lines.pop();
    let got = normalize_transcript(&lines.join("\n"));
    // The reference shows "switch" in the frame although the command
    // typed two lines earlier says "connect"; the frame echoes the input.
    let expected = normalize_transcript(&TRANSCRIPT.replace(
        "Last command: Hi Huey, please switch to Alexander.",
        "Last command: Hi Huey, please connect to Alexander.",
    ));
    if got != expected {
        let first = got.iter().zip(&expected).position(|(a, b)| a != b).unwrap_or(got.len().min(expected.len()));
        return Err(format!(
            "line {first}: got {:?}, expected {:?}",
            got.get(first),
            expected.get(first)
        ));
    }
    Ok(format!("{} lines", got.len()))
}

struct Proc(Child);

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Start a server binary and read the address from its first line.
fn start(bin: &str, args: &[&str]) -> Result<(Proc, String), String> {
    let mut child = Command::new(bin).args(args).stdout(Stdio::piped()).spawn().map_err(|e| e.to_string())?;
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).map_err(|e| e.to_string())?;
    let addr = first.trim().rsplit(' ').next().unwrap_or_default().to_string();
    Ok((Proc(child), addr))
}

fn c6_vns() -> Outcome {
    let began = Instant::now();
    let (_vnsd, root) = start(env!("CARGO_BIN_EXE_vnsd"), &["--port", "0"])?;
    let (_stub, stub_addr) = start(env!("CARGO_BIN_EXE_assistant-stub"), &["--port", "0", "--name", "alexa"])?;
    let owner = VnsClient::new(&root);
    owner.register(&RegistryRecord::new("alexa", "amazon", &stub_addr), "amazon").map_err(|e| e.to_string())?;

    let script = "hi huey, please connect to alexa\nwhat is the forecast\ndisconnect\nadd bananas\n";
    let mut huey = Command::new(HUEY)
        .args(["--vns-endpoint", &root])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    huey.stdin.take().unwrap().write_all(script.as_bytes()).map_err(|e| e.to_string())?;
    let out = String::from_utf8_lossy(&huey.wait_with_output().map_err(|e| e.to_string())?.stdout).into_owned();
    let replies: Vec<&str> = out.lines().map(|l| l.trim_start_matches("huey> ")).filter(|l| !l.is_empty()).skip(5).collect();
    ensure!(replies == ["OK", CANNED_FORECAST, "OK", "[OK]"], "session replies {replies:?}");

    let client = VnsClient::new(&root);
    let (rec, chain) = client.resolve("alexa", "en", None, 1_000).map_err(|e| e.to_string())?;
    let tiers: Vec<Tier> = chain.hops.iter().map(|h| h.tier).collect();
    ensure!(rec.endpoint == stub_addr && tiers == Tier::ALL, "fresh chain {tiers:?}");
    let (_, again) = client.resolve("alexa", "en", None, 1_010).map_err(|e| e.to_string())?;
    ensure!(again.hops.is_empty() && again.cached, "repeat chain {:?}", again.hops);

    let fresh = VnsClient::new(&root);
    fresh.macro_pair("weather", "alexa", 0, &|_| false).map_err(|e| e.to_string())?;
    let before = fresh.network_requests();
    let via_alias = fresh.lookup_alias("weather").ok_or("alias missing")?;
    ensure!(via_alias.endpoint == stub_addr, "alias endpoint {}", via_alias.endpoint);
    ensure!(fresh.network_requests() == before, "alias used the network");

    let took = began.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("4 hops fresh, 0 cached, 0 via alias, {took:.0?}"))
}

fn c7_svc() -> Outcome {
    let report = model_check(SvcConfig::default(), 30, 10_000);
    ensure!(!report.truncated, "state space over 10^4");
    ensure!(report.min_credentials_to_elevated == Some(2), "{report:?}");

    let shell = |inbox: &MemoryInbox| {
        let mut s = ShellSetup { clock: Clock::manual(1), ..ShellSetup::default() };
        s.options.svc_enabled = true;
        s.options.device_user = Some("alice".into());
        s.secrets = SecretSource::Fixed { code: "293749".into(), token: "K7Q2ZP".into() };
        s.channel = Box::new(inbox.clone());
        Shell::new(s).map_err(|e| e.to_string())
    };
    let check = |sh: &mut Shell, line: &str, expected: &str| -> Result<(), String> {
        let got = sh.repl_step(line).text;
        ensure!(got == expected, "{line:?} -> {got:?}");
        Ok(())
    };
    let inbox = MemoryInbox::default();
    let mut sh = shell(&inbox)?;
    check(&mut sh, "Hi Huey", "Hello Alice. Please provide the 6 digit code I just sent to your mobile phone.")?;
    check(&mut sh, "293749", "Thank you Alice, you are now logged in.")?;
    check(
        &mut sh,
        "Huey, please delete all my messages from 2019",
        "The requested action requires additional privileges.\nWould you like to elevate now?",
    )?;
    check(&mut sh, "Yes", "Please follow the instructions I sent to your secure message account just now.")?;
    check(&mut sh, "K7Q2ZP", "Privileges elevated for 120 seconds.\n[OK]\nDeleted 2 messages from 2019.")?;

    let mut sh = shell(&MemoryInbox::default())?;
    sh.repl_step("Hi Huey");
    check(
        &mut sh,
        "I don't have my phone with me right now",
        "OK, here is a challenge question.\nWho was the last person you sent a voice message to and what day was it?",
    )?;
    check(&mut sh, "Bob on Tuesday", "Thank you Alice, you are now logged in.")?;
    Ok(format!("{} states", report.states))
}

fn c8_capabilities() -> Outcome {
    let mut s = ShoppingStore::with_seed(5);
    s.add(&Access::Owner, "home", "bananas", None, None).map_err(|e| e.to_string())?;
    let mut prior = Vec::new();
    for role in [Role::Read, Role::ReadWrite, Role::Admin] {
        prior.push(s.issue(&Access::Owner, "home", role).map_err(|e| e.to_string())?.token);
    }
    let read = Access::Token(prior[0].clone());
    let snap = s.list("home").unwrap().snapshot();
    let attempts = [
        s.add(&read, "home", "milk", None, None).err(),
        s.delete(&read, "home", "bananas").err(),
        s.purge(&read, "home").err(),
        s.sort(&read, "home").err(),
    ];
    ensure!(attempts.iter().all(|e| e == &Some(ShopError::PermissionDenied)), "read token mutated: {attempts:?}");
    ensure!(s.list("home").unwrap().snapshot() == snap, "list changed");

    let transfer = s.issue(&Access::Owner, "home", Role::AdminTransfer).map_err(|e| e.to_string())?;
    for t in &prior {
        let r = s.add(&Access::Token(t.clone()), "home", "milk", None, None);
        ensure!(r == Err(ShopError::BadToken), "prior token {t} still works");
    }
    ensure!(!prior.contains(&transfer.token), "transfer token reused");

    let url = s.share_url(&Access::Owner, "home", 0).map_err(|e| e.to_string())?;
    let token = url.rsplit('/').next().unwrap_or_default();
    ensure!(s.fetch_share(token, 1).is_ok(), "first fetch failed");
    ensure!(s.fetch_share(token, 2) == Err(ShopError::Gone), "second fetch worked");
    ensure!(s.sweep(3) == 1 && s.live_shares() == 0, "sweep left links");
    Ok(String::new())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden parses", c1_golden_parses),
        ("Jak oracle", c2_jak_oracle),
        ("CPF filtering and properties", c3_cpf),
        ("spreadsheet numbers", c4_spreadsheets),
        ("shell transcript", c5_transcript),
        ("VNS integration", c6_vns),
        ("SVC model check and dialogs", c7_svc),
        ("capability suite", c8_capabilities),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(note) if note.is_empty() => println!("PASS {}. {name}", i + 1),
            Ok(note) => println!("PASS {}. {name} ({note})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
