fn main() {
    env_logger::init();
    std::process::exit(ddsde::experiments::run_cli(std::env::args_os()));
}
