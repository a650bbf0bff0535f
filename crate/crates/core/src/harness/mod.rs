//! Seeded experiment orchestration and CSV output.

pub mod config;
pub mod link;
pub mod output;
pub mod system;

pub use config::{JainMode, LinkLevelConfig, ScenarioConfig};
pub use link::run_link_campaign;
pub use system::{run_campaign, run_system_drop, run_system_drop_detailed, CampaignResult, DropOutcome, SchemeSummary};
