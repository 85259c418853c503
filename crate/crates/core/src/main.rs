use std::io;

fn main() {
    let code = matroid_fair::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
