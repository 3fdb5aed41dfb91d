fn main() {
    println!("rondure (under construction)");
}
