//! Loader robustness: corrupted inputs either load to what an independent
//! reading of the text says, or fail with an error. Never a panic.

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use skytrack::dataset::{
    format_ground_truth, load_sequence, parse_sard_annotations, sard_document, synth_sequence, DatasetError, SardImage,
    Strictness,
};
use skytrack_core::synth::{random_scene, SynthSpec};
use skytrack_core::BBox;
use tempfile::TempDir;

const FRAMES: usize = 6;

/// Reads one ground-truth line the way the format is documented: `absent`,
/// or four comma-separated finite numbers with positive size.
fn oracle_line(line: &str) -> Option<Option<[f64; 4]>> {
    let line = line.trim();
    if line == "absent" {
        return Some(None);
    }
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return None;
    }
    let mut v = [0.0f64; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().ok()?;
    }
    (v.iter().all(|x| x.is_finite()) && v[2] > 0.0 && v[3] > 0.0).then_some(Some(v))
}

fn oracle(text: &str) -> Option<Vec<Option<[f64; 4]>>> {
    let rows = text.lines().map(oracle_line).collect::<Option<Vec<_>>>()?;
    (rows.len() == FRAMES && rows.iter().any(Option::is_some)).then_some(rows)
}

#[derive(Debug, Clone)]
enum Mutation {
    DeleteLine(usize),
    DuplicateLine(usize),
    Insert(usize, char),
    Remove(usize),
    Replace(usize, char),
    Pad(usize),
}

fn mutation() -> impl Strategy<Value = Mutation> {
    let ch =
        prop_oneof![Just(','), Just('-'), Just('.'), Just('e'), Just(' '), Just('x'), Just('\n'), Just('0'), Just('9')];
    prop_oneof![
        any::<usize>().prop_map(Mutation::DeleteLine),
        any::<usize>().prop_map(Mutation::DuplicateLine),
        (any::<usize>(), ch.clone()).prop_map(|(i, c)| Mutation::Insert(i, c)),
        any::<usize>().prop_map(Mutation::Remove),
        (any::<usize>(), ch).prop_map(|(i, c)| Mutation::Replace(i, c)),
        any::<usize>().prop_map(Mutation::Pad),
    ]
}

fn apply(text: &str, m: &Mutation) -> String {
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut chars: Vec<char> = text.chars().collect();
    match *m {
        Mutation::DeleteLine(i) => {
            lines.remove(i % lines.len());
        }
        Mutation::DuplicateLine(i) => {
            let l = lines[i % lines.len()].clone();
            lines.insert(i % lines.len(), l);
        }
        Mutation::Pad(i) => {
            let k = i % lines.len();
            lines[k] = format!("  {} ", lines[k].replace(',', " , "));
        }
        Mutation::Insert(i, c) => {
            chars.insert(i % (chars.len() + 1), c);
            return chars.into_iter().collect();
        }
        Mutation::Remove(i) => {
            chars.remove(i % chars.len());
            return chars.into_iter().collect();
        }
        Mutation::Replace(i, c) => {
            let k = i % chars.len();
            chars[k] = c;
            return chars.into_iter().collect();
        }
    }
    lines.join("\n") + "\n"
}

fn base_ground_truth(seed: u64) -> Vec<Option<BBox>> {
    (0..FRAMES as u64)
        .map(|i| {
            let k = seed.wrapping_add(i);
            (i == 0 || k % 4 != 0)
                .then(|| BBox::new((k % 17) as f64 * 1.5, (k % 11) as f64, 4.0 + (k % 7) as f64, 6.25).unwrap())
        })
        .collect()
}

struct Fixture {
    _tmp: TempDir,
    dir: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("seq");
    synth_sequence(&dir, &SynthSpec::linear("fuzz", FRAMES, 0)).unwrap();
    Fixture { _tmp: tmp, dir }
}

fn same(loaded: &[Option<BBox>], expected: &[Option<[f64; 4]>]) -> bool {
    loaded.len() == expected.len()
        && loaded.iter().zip(expected).all(|(l, e)| match (l, e) {
            (None, None) => true,
            (Some(b), Some(v)) => [b.x, b.y, b.w, b.h] == *v,
            _ => false,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mutated_ground_truth_loads_faithfully_or_errors(seed in 0u64..1000, muts in proptest::collection::vec(mutation(), 1..4)) {
        let f = fixture();
        let text = muts.iter().fold(format_ground_truth(&base_ground_truth(seed)), |t, m| apply(&t, m));
        fs::write(f.dir.join("groundtruth.txt"), &text).unwrap();
        match (load_sequence(&f.dir), oracle(&text)) {
            (Ok(seq), Some(expected)) => prop_assert!(same(&seq.ground_truth, &expected), "{text:?}"),
            (Err(e), None) => prop_assert!(matches!(
                e,
                DatasetError::MalformedBox { .. } | DatasetError::LineCountMismatch { .. } | DatasetError::NoGroundTruth(_)
            ), "{e}"),
            (Ok(_), None) => prop_assert!(false, "accepted {text:?}"),
            (Err(e), Some(_)) => prop_assert!(false, "rejected {text:?}: {e}"),
        }
    }

    #[test]
    fn written_ground_truth_reads_back_exactly(seed in 0u64..1000) {
        let f = fixture();
        let gt = base_ground_truth(seed);
        fs::write(f.dir.join("groundtruth.txt"), format_ground_truth(&gt)).unwrap();
        prop_assert_eq!(load_sequence(&f.dir).unwrap().ground_truth, gt);
    }

    #[test]
    fn corrupted_annotation_json_never_panics(seed in 0u64..200, at in any::<usize>(), byte in any::<u8>()) {
        let images: Vec<SardImage> = (0..3)
            .map(|i| {
                let s = random_scene(seed, i, 64, 48, 3);
                SardImage { image: format!("{i}.png"), width: Some(64), height: Some(48), persons: s.persons }
            })
            .collect();
        let good = serde_json::to_string_pretty(&sard_document(&images)).unwrap();
        let (back, warnings) = parse_sard_annotations(&good, Path::new("a.json"), Strictness::Strict).unwrap();
        prop_assert_eq!(&back, &images);
        prop_assert!(warnings.is_empty());

        let mut bytes = good.into_bytes();
        let k = at % bytes.len();
        bytes[k] = byte;
        if let Ok(text) = String::from_utf8(bytes) {
            for strictness in [Strictness::Strict, Strictness::Lenient] {
                if let Ok((imgs, _)) = parse_sard_annotations(&text, Path::new("a.json"), strictness) {
                    prop_assert!(imgs.iter().flat_map(|i| &i.persons).all(|p| p.bbox.is_valid()));
                }
            }
        }
    }
}

#[test]
fn line_count_must_match_frames() {
    let f = fixture();
    let mut gt = base_ground_truth(1);
    gt.pop();
    fs::write(f.dir.join("groundtruth.txt"), format_ground_truth(&gt)).unwrap();
    let err = load_sequence(&f.dir).unwrap_err();
    assert!(
        matches!(err, DatasetError::LineCountMismatch { lines, frames, .. } if lines == FRAMES - 1 && frames == FRAMES)
    );
}
