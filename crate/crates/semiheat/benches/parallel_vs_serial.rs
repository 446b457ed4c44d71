// placeholder, filled in after the library compiles
fn main() {}
