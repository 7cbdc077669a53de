use std::io;

fn main() {
    zdforge::cli::configure_threads();
    let code = zdforge::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
