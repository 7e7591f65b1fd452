//! Reference skill engines and the registry that binds them to Jak call
//! targets.

pub mod messages;
pub mod sheet;
pub mod shopping;

use crate::jak::EngineRegistry;

pub use messages::{Message, MessageEngine};
pub use sheet::{Cell, CmpOp, Sheet, SheetEngine, SheetError, Template};
pub use shopping::{Access, Browser, ChoicePage, Role, SearchEngine, ShopError, ShoppingEngine, ShoppingStore};

/// Register the shopping, search, sheet and message engines under the
/// targets named in the rule table.
pub fn register_skills(registry: &mut EngineRegistry, store: ShoppingStore, session_year: i32) {
    registry.register(&["shoppingHandler"], Box::new(ShoppingEngine::new(store)));
    registry.register(&["action_shop"], Box::new(SearchEngine::default()));
    registry.register(&["sheetHandler"], Box::new(SheetEngine::new(session_year)));
    registry.register(&["messageHandler"], Box::new(MessageEngine::sample()));
}
