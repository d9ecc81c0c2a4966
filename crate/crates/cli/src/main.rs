use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let out = stardmp_cli::run(std::env::args_os());
    if let Some(msg) = out.report.get("error").and_then(|m| m.as_str()) {
        eprintln!("stardmp: {}", msg.trim_end());
    }
    let text = serde_json::to_string_pretty(&out.report).expect("reports serialize");
    // a closed pipe downstream is not an error of ours
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    ExitCode::from(out.code as u8)
}
