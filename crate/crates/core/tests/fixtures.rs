//! The canonical push scenes shipped under `fixtures/` must match the
//! scenes built in code. Set `PARAPUSH_UPDATE_FIXTURES=1` to regenerate.

use std::path::PathBuf;

use parapush::experiments::{canonical_scene, PushSide, Shape, CANONICAL_PUSHES};
use parapush::io::SceneFile;

fn fixture_path(side: PushSide, shape: Shape) -> PathBuf {
    let side = match side {
        PushSide::Center => "center",
        PushSide::Side => "side",
    };
    let shape = match shape {
        Shape::Box => "box",
        Shape::Disc => "disc",
    };
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{side}_{shape}.json"))
}

#[test]
fn canonical_fixtures_match_code() {
    let update = std::env::var_os("PARAPUSH_UPDATE_FIXTURES").is_some();
    for (side, shape) in CANONICAL_PUSHES {
        let expected = SceneFile::new(canonical_scene::<f64>(side, shape));
        let path = fixture_path(side, shape);
        if update {
            std::fs::write(&path, expected.to_json().unwrap() + "\n").unwrap();
        }
        let loaded = SceneFile::<f64>::load(&path).unwrap();
        let expected = expected.validated().unwrap();
        assert_eq!(loaded, expected, "{}", path.display());
    }
}
