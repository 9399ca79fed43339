fn main() {
    let mut stdout = std::io::stdout().lock();
    let code = qoe_narx::app::run_from_args(std::env::args_os(), &mut stdout);
    std::process::exit(code);
}
