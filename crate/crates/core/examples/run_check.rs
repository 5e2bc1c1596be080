use std::time::Instant;

use fibdirac::verify::{run_check, CheckConfig, CheckName};

fn main() {
    let mut args = std::env::args().skip(1);
    let check: CheckName = args.next().expect("check name").parse().unwrap();
    let mut cfg = CheckConfig::default();
    if let Some(g) = args.next() {
        cfg.geometry = Some(g.parse().unwrap());
    }
    cfg.resolutions = args.map(|a| a.parse().unwrap()).collect();
    let t = Instant::now();
    let r = run_check(check, &cfg).unwrap();
    println!("{}", r.to_json());
    eprintln!("elapsed {:.1}s", t.elapsed().as_secs_f64());
}
