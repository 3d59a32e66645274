//! Parser properties shared with the fuzz targets, replayed over the checked-in
//! corpus and over generated inputs.

use std::path::PathBuf;

use proptest::prelude::*;
use staticext::field::standard;
use staticext::modes::Parity;
use staticext_cli::bdfile::{BoundaryFile, Term};
use staticext_cli::solfile;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

fn check_bd(text: &str) {
    if let Ok(file) = BoundaryFile::parse(text) {
        assert_eq!(BoundaryFile::parse(&file.render()).unwrap(), file);
        if file.max_degree() <= 4 {
            let _ = file.to_boundary_data(&standard(8, 4).unwrap());
        }
    }
}

fn check_sol(text: &str) {
    if let Ok(state) = solfile::parse(text) {
        solfile::parse(&solfile::render(&state)).unwrap();
    }
}

#[test]
fn corpus_seeds_satisfy_the_fuzz_properties() {
    let mut parsed = 0;
    for (_, text) in corpus("bd_parse") {
        check_bd(&text);
        parsed += usize::from(BoundaryFile::parse(&text).is_ok());
        // Every truncation is handled too.
        for cut in 0..text.len() {
            if text.is_char_boundary(cut) {
                check_bd(&text[..cut]);
            }
        }
    }
    assert!(parsed >= 4);
    for (path, text) in corpus("sol_parse") {
        assert!(solfile::parse(&text).is_ok(), "{}", path.display());
        for cut in (0..text.len()).step_by(37) {
            if text.is_char_boundary(cut) {
                check_sol(&text[..cut]);
            }
        }
    }
}

fn mode() -> impl Strategy<Value = (usize, usize)> {
    (0usize..=4).prop_flat_map(|l| (Just(l), 1..=2 * l + 1))
}

prop_compose! {
    fn boundary_file()(
        sigma in proptest::collection::vec((mode(), any::<bool>(), any::<bool>(), -1e3f64..1e3), 0..8),
        h in proptest::collection::vec((mode(), -1e3f64..1e3), 0..8),
    ) -> BoundaryFile {
        let mut f = BoundaryFile { lmax: 4, sigma: Default::default(), h: Default::default() };
        for ((l, m), odd, c_term, v) in sigma {
            let parity = if odd { Parity::Odd } else { Parity::Even };
            let term = if c_term || odd { Term::C } else { Term::D };
            if term == Term::C && l < 2 {
                continue;
            }
            f.sigma.insert((l, m, parity, term), v);
        }
        for ((l, m), v) in h {
            f.h.insert((l, m), v);
        }
        f
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_boundary_files_round_trip(f in boundary_file()) {
        prop_assert_eq!(BoundaryFile::parse(&f.render()).unwrap(), f);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "(staticext-bd v1\n)?(lmax [0-9]{1,2}\n)?((sigma|h|#|x) [-0-9 .e]{0,20}(even|odd)? ?[cd]? ?[-0-9.e]{0,8}\n){0,6}") {
        check_bd(&text);
    }
}
