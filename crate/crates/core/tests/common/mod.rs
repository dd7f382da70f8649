#![allow(dead_code)]

pub mod criteria;
pub mod oracle;
pub mod server;
