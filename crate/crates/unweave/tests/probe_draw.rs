use unweave::sim::{generate_world, render, ScenarioSpec};

#[test]
fn draw_worlds() {
    for (n, m, seed) in [(2u32, 2u32, 0u64), (3, 3, 0), (3, 4, 7), (3, 5, 3)] {
        let spec = ScenarioSpec { n_cables: n, n_crossings: m, seed, ..Default::default() };
        match generate_world(&spec) {
            Ok(w) => {
                let (img, _) = render(&w);
                img.save(format!("/tmp/world_{n}_{m}.png")).unwrap();
                println!("({n},{m}) OK -> /tmp/world_{n}_{m}.png");
            }
            Err(e) => println!("({n},{m}) FAILED: {e}"),
        }
    }
}
