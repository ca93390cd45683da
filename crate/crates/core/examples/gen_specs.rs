//! Regenerates the JSON system specs in specs/.
use twincover::systems::rat::rat;
use twincover::systems::{FiniteSystem, PlIntervalMap, ShiftSystem, System};

fn main() {
    let out = std::path::Path::new("specs");
    std::fs::create_dir_all(out).unwrap();
    let gentle = PlIntervalMap::new(
        vec![rat(0, 1), rat(1, 1)],
        vec![rat(1, 4), rat(3, 4)],
    )
    .unwrap();
    let specs: Vec<(&str, System)> = vec![
        ("swap", System::Finite(FiniteSystem::swap())),
        ("tent", System::PlInterval(PlIntervalMap::tent())),
        ("gentle", System::PlInterval(gentle)),
        ("full2", System::Shift(ShiftSystem::full_two())),
        ("golden_mean", System::Shift(ShiftSystem::golden_mean())),
    ];
    for (name, sys) in specs {
        let path = out.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&sys).unwrap()).unwrap();
        println!("wrote {}", path.display());
    }
}
