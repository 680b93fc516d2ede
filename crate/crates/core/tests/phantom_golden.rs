use spinsim::imaging::{make_lego_phantom, Feature};

#[test]
fn lego_64_matches_golden_map() {
    let golden = include_str!("data/lego_phantom_64.txt");
    let p = make_lego_phantom(64).unwrap();
    let m = p.mask().unwrap();
    let rows: Vec<&str> = golden.lines().collect();
    assert_eq!(rows.len(), 64);
    for (i, line) in rows.iter().enumerate() {
        assert_eq!(line.len(), 64);
        for (j, ch) in line.chars().enumerate() {
            let want = match ch {
                '.' => Feature::Air,
                'W' => Feature::Water,
                'L' => Feature::Lego,
                other => panic!("unexpected {other}"),
            };
            assert_eq!(*m.get(i, j), want, "voxel ({i}, {j})");
            let rho = if want == Feature::Water { 1.0 } else { 0.0 };
            assert_eq!(*p.density().get(i, j), rho);
        }
    }
}
