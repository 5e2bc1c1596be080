//! Clifford modules up to dimension 8 and the fiber/base factorization.

use fibdirac::clifford::{build_clifford_module, factorize_spinors, relation_defect};

fn main() {
    for n in [2, 4, 6, 8] {
        let m = build_clifford_module(n).unwrap();
        println!(
            "Cl({n}): rank {:>2}, relations {:.1e}, skew {:.1e}, grading {:.1e}",
            m.rank,
            m.relation_defect(),
            m.skew_defect(),
            m.grading_defect()
        );
    }
    for (v, h) in [(1, 1), (2, 2), (2, 4)] {
        let f = factorize_spinors(v, h).unwrap();
        println!(
            "fiber {v} + base {h}: rank {}, relations {:.1e}, cross {:.1e}",
            f.total_rank,
            relation_defect(&f.total_generators()),
            f.cross_defect()
        );
    }
}
