//! Agenda-based user simulator: goals, user turns and success judging.

pub mod agenda;
pub mod goal;
pub mod judge;
pub mod realize;

pub use agenda::{AgendaItem, SimConfig, UserSimulator, UserTurn};
pub use goal::{load_goals, sample_goal, save_goals, DomainGoal, GoalConfig, UserGoal};
pub use judge::{judge_success, Judgement};
pub use realize::{realize_user_utterance, Realized};
