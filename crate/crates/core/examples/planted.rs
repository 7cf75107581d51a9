//! Writes a planted-signal dataset as CSV to standard output.
//!
//! `cargo run -p swag --example planted -- [n] [p] [informative] [separation] [seed]`

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "200").parse().expect("n");
    let p: usize = arg(1, "50").parse().expect("p");
    let informative: usize = arg(2, "3").parse().expect("informative");
    let separation: f64 = arg(3, "2.0").parse().expect("separation");
    let seed: u64 = arg(4, "0").parse().expect("seed");
    let planted = swag::synthetic::planted(n, p, informative, separation, seed);
    eprintln!("informative columns: {:?}", planted.informative);
    print!("{}", planted.dataset.to_csv_string("class"));
}
