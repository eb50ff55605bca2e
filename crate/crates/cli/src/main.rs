fn main() {
    std::process::exit(lingen::run(std::env::args_os()));
}
