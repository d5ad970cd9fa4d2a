//! The command-line pipeline driven in-process, from building a system to
//! comparing laws on it. Artifacts go to a temporary directory.

use stabkit::cli::run;

const STEPS: &[&str] = &[
    "example --name transport-1d --n 8 --speed 0.25 --window-start 2 --window-len 2 --out sys.json",
    "certify --system sys.json --mode static --T 2 --delta 0.5 --out static.json",
    "certify --system sys.json --mode dynamic --cert static.json --out cert.json",
    "synthesize --system sys.json --cert cert.json --method main --T 3 --out law.json",
    "verify --system sys.json --law law.json --out report.json",
    "compare --system sys.json --out compare.csv",
];

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    std::env::set_current_dir(dir.path())?;
    for step in STEPS {
        let code = run(std::iter::once("stabkit").chain(step.split_whitespace()));
        println!("stabkit {step}\n  -> exit {code}");
    }
    println!("{}", std::fs::read_to_string("compare.csv")?);
    Ok(())
}
