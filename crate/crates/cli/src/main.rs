fn main() {
    std::process::exit(fatoulab_cli::run(std::env::args_os()));
}
