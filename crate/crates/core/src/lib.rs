pub mod catalog;
pub mod cli;
pub mod constraint_kb;
pub mod context_engine;
pub mod error;
pub mod plan_recommender;
pub mod route_model;
pub mod route_recommender;
pub mod service;
