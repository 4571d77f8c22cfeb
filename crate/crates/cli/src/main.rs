fn main() {
    std::process::exit(bottleneck_lab::run(std::env::args_os()));
}
