fn main() {
    eprintln!("fracmin: command-line interface not wired up yet");
    std::process::exit(2);
}
