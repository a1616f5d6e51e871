fn main() {
    if let Err(f) = vortonlab_cli::init_threads() {
        eprintln!("vorton-lab: {}", f.message());
        std::process::exit(f.exit_code());
    }
    std::process::exit(vortonlab_cli::run(std::env::args_os()));
}
