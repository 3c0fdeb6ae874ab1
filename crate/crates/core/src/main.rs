fn main() {
    std::process::exit(microfuse::run_cli());
}
