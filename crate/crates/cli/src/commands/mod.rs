pub mod meta;
pub mod mi;
pub mod oracle;
