fn main() {
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    std::process::exit(detcost::cli::run(std::env::args_os(), &mut stdout, &mut stderr));
}
