use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use huey_core::cpf::{CpfMode, SentimentLexicon};
use huey_core::shell::{Clock, Shell, ShellSetup};
use huey_core::skills::ShoppingStore;
use huey_core::vns::stub::{StubAssistant, CANNED_FORECAST};
use huey_core::vns::wire::{self, Frame};
use huey_core::vns::{Broadcast, Registry, RegistryRecord, Tier, VnsClient, VnsError, VnsServer};

struct Net {
    root: String,
    stub: Arc<StubAssistant>,
    stub_addr: String,
}

fn net() -> Net {
    let server = Arc::new(VnsServer::all_tiers(Registry::new()));
    let root = server.spawn("127.0.0.1:0").unwrap().to_string();
    let stub = Arc::new(StubAssistant::new("alexa"));
    let stub_addr = wire::spawn("127.0.0.1:0", stub.handler()).unwrap().to_string();
    let client = VnsClient::new(&root);
    client.register(&RegistryRecord::new("alexa", "amazon", &stub_addr), "amazon").unwrap();
    client.register(&RegistryRecord::new("grocer", "grocer-inc", &stub_addr), "grocer-inc").unwrap();
    Net { root, stub, stub_addr }
}

fn shell(n: &Net) -> Shell {
    let setup = ShellSetup {
        vns: Some(VnsClient::new(&n.root)),
        clock: Clock::manual(10_000),
        store: ShoppingStore::with_seed(3),
        ..ShellSetup::default()
    };
    Shell::new(setup).unwrap()
}

#[test]
fn fresh_resolve_walks_four_tiers_then_caches() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let (rec, chain) = c.resolve("Alexa", "en", None, 100).unwrap();
    assert_eq!(rec.endpoint, n.stub_addr);
    assert_eq!(rec.owner, "amazon");
    assert!(!chain.cached);
    let tiers: Vec<Tier> = chain.hops.iter().map(|h| h.tier).collect();
    assert_eq!(tiers, Tier::ALL);
    let servers: Vec<&str> = chain.hops.iter().map(|h| h.server.as_str()).collect();
    assert_eq!(servers, ["root", "lang/en", "wake/en/", "prop/amazon/en"]);
    assert_eq!(c.network_requests(), 4);

    let (again, chain2) = c.resolve("alexa", "en", None, 100 + 299).unwrap();
    assert_eq!(again, rec);
    assert!(chain2.cached);
    assert!(chain2.hops.is_empty());
    assert_eq!(c.network_requests(), 4);

    // TTL (300 s) elapsed: back to the network.
    let (_, chain3) = c.resolve("alexa", "en", None, 100 + 300).unwrap();
    assert_eq!(chain3.hops.len(), 4);
    assert_eq!(c.network_requests(), 8);
}

#[test]
fn greeting_tier_and_failures() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let (_, chain) = c.resolve_fresh("grocer", "en", Some("Hello")).unwrap();
    assert_eq!(chain.hops[2].server, "wake/en/hello");
    assert_eq!(c.resolve_fresh("nobody", "en", None).unwrap_err(), VnsError::NotFound(Tier::Wake));
    assert_eq!(c.resolve_fresh("alexa", "fr", None).unwrap_err(), VnsError::NotFound(Tier::Root));
    assert_eq!(c.resolve_fresh("alexa", "en", Some("yo")).unwrap_err(), VnsError::NotFound(Tier::Language));
}

#[test]
fn registration_rules() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let dup = c.register(&RegistryRecord::new("alexa", "amazon", "127.0.0.1:1"), "amazon");
    assert!(matches!(dup, Err(VnsError::Conflict(_))));
    let spoof = c.register(&RegistryRecord::new("sigmund", "mallory", "127.0.0.1:1"), "eve");
    assert_eq!(spoof, Err(VnsError::Unauthorized));
    c.register(&RegistryRecord::new("sigmund", "huey-labs", "127.0.0.1:1"), "huey-labs").unwrap();
    assert!(c.resolve_fresh("sigmund", "en", None).is_ok());
    assert_eq!(c.deregister("sigmund", "en", "eve"), Err(VnsError::Unauthorized));
    c.deregister("sigmund", "en", "huey-labs").unwrap();
    assert_eq!(c.resolve_fresh("sigmund", "en", None).unwrap_err(), VnsError::NotFound(Tier::Wake));
}

#[test]
fn macros_answer_without_network() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let kw = |w: &str| w == "add";
    assert!(matches!(c.macro_pair("add", "alexa", 0, &kw), Err(VnsError::AliasCollision(_))));
    assert!(matches!(c.macro_pair("grocer", "alexa", 0, &kw), Err(VnsError::AliasCollision(_))));
    assert!(matches!(c.macro_pair("all", "alexa", 0, &kw), Err(VnsError::AliasCollision(_))));
    let rec = c.macro_pair("shop", "grocer", 0, &kw).unwrap();
    c.macro_pair("weather", "alexa", 0, &kw).unwrap();
    let before = c.network_requests();
    assert_eq!(c.lookup_alias("Shop"), Some(rec.clone()));
    assert_eq!(c.network_requests(), before);
    let all = c.macro_define("all").unwrap();
    assert_eq!(all.lines().count(), 2);
    assert!(all.contains(&format!("shop -> grocer at {}", n.stub_addr)));
    assert_eq!(c.macro_delete("nope"), Err(VnsError::UnknownAlias("nope".into())));
    c.macro_delete("weather").unwrap();
    assert_eq!(c.macro_define("all").unwrap().lines().count(), 1);
    c.macro_reset();
    assert_eq!(c.macro_define("all").unwrap(), "");
}

#[test]
fn switch_forecast_and_disconnect() {
    let n = net();
    let mut sh = shell(&n);
    assert_eq!(sh.repl_step("hi huey, please connect to alexa").text, "OK");
    assert_eq!(sh.route().unwrap().name, "alexa");
    assert_eq!(sh.repl_step("what is the forecast").text, CANNED_FORECAST);
    assert_eq!(sh.repl_step("disconnect").text, "OK");
    assert!(sh.route().is_none());
    assert_eq!(sh.repl_step("add bananas").text, "[OK]");
    let bodies: Vec<String> = n.stub.captured.lock().unwrap().iter().map(|f| f.body.clone()).collect();
    assert_eq!(bodies, ["what is the forecast"]);
}

#[test]
fn one_line_request_with_payload() {
    let n = net();
    let mut sh = shell(&n);
    sh.repl_step("hi huey");
    assert_eq!(sh.repl_step("ask alexa for the forecast").text, CANNED_FORECAST);
}

#[test]
fn wake_prefixed_brand_session_is_kept() {
    let n = net();
    let mut sh = shell(&n);
    assert_eq!(sh.repl_step("Sigma grocer add shopping list soap").text, "Added soap to your shopping list.");
    assert_eq!(sh.repl_step("Sigma carrots").text, "Added carrots to your shopping list.");
    assert_eq!(sh.repl_step("Sigma show my list").text, "Your shopping list: soap, carrots.");
    assert_eq!(sh.repl_step("Sigma disconnect").text, "OK");
    assert!(sh.route().is_none());
}

#[test]
fn switch_back_and_disconnect_semantics() {
    let n = net();
    let mut sh = shell(&n);
    sh.repl_step("hi huey connect to alexander");
    sh.repl_step("connect to alexa");
    assert_eq!(sh.route().unwrap().name, "alexa");
    sh.repl_step("switch back");
    assert_eq!(sh.route().unwrap().name, "alexander");
    sh.repl_step("connect to alexa");
    sh.repl_step("connect to sigmund");
    sh.repl_step("disconnect");
    assert!(sh.route().is_none());
}

#[test]
fn own_name_overrides_a_remote_session() {
    let n = net();
    let mut sh = shell(&n);
    sh.repl_step("hi huey connect to alexa");
    assert_eq!(sh.repl_step("huey add apples").text, "[OK]");
    assert!(sh.route().is_none());
}

#[test]
fn alias_routes_without_resolver_traffic() {
    let n = net();
    let mut sh = shell(&n);
    sh.repl_step("hi huey");
    assert!(sh.repl_step("pair grocer to shop").text.starts_with("OK, shop now reaches grocer"));
    let before = sh.vns().unwrap().network_requests();
    assert_eq!(sh.repl_step("shop add soap").text, "Added soap to your shopping list.");
    assert_eq!(sh.vns().unwrap().network_requests(), before);
    assert!(sh.repl_step("define all").text.contains("shop -> grocer"));
    assert_eq!(sh.repl_step("delete shop").text, "OK, deleted shop");
    assert!(sh.repl_step("pair grocer to add").is_error());
}

#[test]
fn ownership_routes_unprefixed_requests() {
    let n = net();
    let mut sh = shell(&n);
    sh.repl_step("hi huey");
    assert!(sh.repl_step("ownership nobody").text.contains("not found"));
    assert!(sh.repl_step("ownership grocer").text.contains("grocer"));
    assert_eq!(sh.repl_step("add apples").text, "Added apples to your shopping list.");
    // A wake prefix keeps the request local.
    assert_eq!(sh.repl_step("huey add pears").text, "[OK]");
    sh.vns().unwrap().clear_ownership();
    assert_eq!(sh.repl_step("add plums").text, "[OK]");
}

#[test]
fn sanitized_forward_drops_sentiment_words() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let mut rec = RegistryRecord::new("ticketer", "tix", &n.stub_addr);
    rec.descriptor.broadcast = Broadcast::Sanitized;
    c.register(&rec, "tix").unwrap();
    let mut sh = shell(&n);
    sh.repl_step("hi huey connect to ticketer");
    sh.repl_step("i desperately need 2 tickets for sunday red sox game");
    sh.repl_step("i really badly need any tickets for sunday whatever");
    let frames = n.stub.captured.lock().unwrap().clone();
    assert_eq!(frames.len(), 2);
    let lex = SentimentLexicon::default_lexicon();
    for f in &frames {
        assert_eq!(f.get("privacy"), Some("strong-incognito"));
        let words: BTreeSet<&str> = f.body.split_whitespace().collect();
        assert!(words.iter().all(|w| !lex.sentiment.contains(*w)), "leaked sentiment in {:?}", f.body);
    }
    assert_eq!(frames[0].body, "2 tickets sunday red sox game");
    // A safety word passes the request through untouched.
    assert_eq!(sh.sanitize("i really need help", CpfMode::StrongIncognito), "i really need help");
}

#[test]
fn unreachable_remote_falls_back() {
    let n = net();
    let c = VnsClient::new(&n.root);
    // Nothing listens on port 9 (discard) in the test sandbox.
    c.register(&RegistryRecord::new("ghost", "ghosts", "127.0.0.1:9"), "ghosts").unwrap();
    let mut sh = shell(&n);
    sh.repl_step("hi huey connect to alexander");
    sh.repl_step("connect to ghost");
    let r = sh.repl_step("hello there");
    assert!(r.is_error());
    assert!(r.text.contains("unreachable"), "{}", r.text);
    assert_eq!(sh.route().unwrap().name, "alexander");
}

#[test]
fn split_tiers_across_processes() {
    // Wake and proprietary tiers in one server, root and language in another.
    let back = Arc::new(VnsServer::new(
        Registry::new(),
        [Tier::Wake, Tier::Proprietary].into_iter().collect(),
        BTreeMap::new(),
    ));
    let back_addr = back.spawn("127.0.0.1:0").unwrap().to_string();
    let front = Arc::new(VnsServer::new(
        Registry::new(),
        [Tier::Root, Tier::Language].into_iter().collect(),
        [(Tier::Wake, back_addr.clone()), (Tier::Proprietary, back_addr.clone())].into_iter().collect(),
    ));
    let front_addr = front.spawn("127.0.0.1:0").unwrap().to_string();
    let c = VnsClient::new(&front_addr);
    c.register(&RegistryRecord::new("sigma", "huey-labs", "127.0.0.1:1"), "huey-labs").unwrap();
    let (_, chain) = c.resolve_fresh("sigma", "en", None).unwrap();
    let endpoints: Vec<&str> = chain.hops.iter().map(|h| h.endpoint.as_str()).collect();
    assert_eq!(endpoints, [front_addr.as_str(), front_addr.as_str(), back_addr.as_str(), back_addr.as_str()]);
}

#[test]
fn ping_and_bad_frames() {
    let n = net();
    let c = VnsClient::new(&n.root);
    let body = c.ping(&n.root).unwrap();
    assert!(body.contains("tiers:root,language,wake,proprietary"));
    let resp = wire::round_trip(&n.root, &Frame::request("teleport"), wire::DEFAULT_TIMEOUT).unwrap();
    assert_eq!(resp.status().unwrap_err().0, "protocol");
}
