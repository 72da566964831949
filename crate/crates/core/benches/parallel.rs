// Placeholder; filled in once the fbm and sde modules exist.
fn main() {}
