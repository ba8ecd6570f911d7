fn main() {
    std::process::exit(crowdprior::run_cli(std::env::args_os()));
}
