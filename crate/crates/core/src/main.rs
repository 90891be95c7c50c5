fn main() {
    let code = nclangevin::cli::execute(std::env::args_os());
    std::process::exit(code);
}
