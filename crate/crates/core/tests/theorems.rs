//! Cross-module round-trip and hierarchy properties.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use stochbisim::equivalence::{
    check_bisim_nondegenerate, check_bisimulation, check_external_equivalence,
    check_linear_equivalence, check_same_realization, derive_transformation,
    extended_noise_match_residual, maximal_external_relation, Verdict,
};
use stochbisim::numlin::{self, Tolerance};
use stochbisim::reduction::{minimal_bisim, minimal_external};
use stochbisim::relations::LinearRelation;
use stochbisim::sysmodel::obs_matrix;

fn tol() -> Tolerance {
    Tolerance::default()
}

#[test]
fn reduction_round_trips_on_random_systems() {
    let mut rng = rng(2024);
    for case in 0..40 {
        let n = 1 + case % 6;
        let obs_dim = 1 + rng.random_range(0..n);
        let noise_rank = rng.random_range(0..=n);
        let stable = case % 3 != 0;
        let sys = random_structured_system(&mut rng, n, obs_dim, noise_rank, stable);

        let (reduced, relation, decomp) = minimal_external(&sys, tol()).unwrap();
        let obs = obs_matrix(sys.a(), sys.c(), n).unwrap();
        assert_eq!(
            reduced.state_dim(),
            numlin::rank(&obs, tol()),
            "case {case}: reduced dimension must equal the observability rank"
        );
        assert!(relation.is_equivalence(tol()));
        let report =
            check_external_equivalence(&reduced, &sys, Some(&decomp.graph_relation()), tol())
                .unwrap();
        assert_eq!(report.verdict, Verdict::Holds, "case {case} external round trip");

        let (reduced, relation, certificate, decomp) = minimal_bisim(&sys, tol()).unwrap();
        assert!(certificate.verified(), "case {case} certificate");
        assert!(relation.is_equivalence(tol()));
        if reduced.state_dim() < sys.state_dim() {
            let report =
                check_bisimulation(&reduced, &sys, &decomp.graph_relation(), tol()).unwrap();
            assert_eq!(report.verdict, Verdict::Holds, "case {case} bisim round trip");
        }
    }
}

#[test]
fn equivalence_hierarchy_on_similarity_pairs() {
    let mut rng = rng(77);
    for case in 0..40 {
        let n = 1 + case % 5;
        let obs_dim = 1 + rng.random_range(0..n);
        let sys = random_structured_system(&mut rng, n, obs_dim, n, true);
        let t = random_well_conditioned(&mut rng, n);
        let other = transform_system(&sys, &t);

        let lin = check_linear_equivalence(&sys, &other, &t, tol()).unwrap();
        assert_eq!(lin.verdict, Verdict::Holds, "case {case} lin");

        // Graph relation of the transformation: x2 = T x1.
        let graph = LinearRelation::graph(&t);
        let bis = check_bisimulation(&sys, &other, &graph, tol()).unwrap();
        assert_eq!(bis.verdict, Verdict::Holds, "case {case} bisim");

        let ext = check_external_equivalence(&sys, &other, Some(&graph), tol()).unwrap();
        assert_eq!(ext.verdict, Verdict::Holds, "case {case} ext");

        // Matched noise responses extend across all time pairs.
        let residual = extended_noise_match_residual(&sys, &other, &graph).unwrap();
        let scale = 1.0 + sys.g().norm() * t.norm();
        assert!(
            residual <= 1e-7 * scale * (1.0 + sys.a().norm()).powi(2 * n as i32),
            "case {case}: extended noise residual {residual}"
        );
    }
}

#[test]
fn nondegenerate_transformation_recovery() {
    let mut rng = rng(4242);
    for case in 0..20 {
        let n = 1 + case % 4;
        let base = random_structured_system(&mut rng, n, n, n, true);
        // Force full-rank noise.
        let sys = stochbisim::StochasticLinearSystem::new(
            base.a().clone(),
            base.b().clone(),
            base.c().clone(),
            base.g() + DMatrix::identity(n, n.max(base.g().ncols())).columns(0, base.g().ncols()) * 2.0,
            base.mu().clone(),
            base.psi().clone(),
        )
        .unwrap();
        if !sys.is_nondegenerate(tol()) {
            continue;
        }
        let t = random_well_conditioned(&mut rng, n);
        let other = transform_system(&sys, &t);

        let report = check_bisim_nondegenerate(&sys, &other, tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds, "case {case}");

        let rel = maximal_external_relation(&sys, &other).unwrap();
        let derived = derive_transformation(&rel, tol()).unwrap();
        assert!(
            (&derived - &t).norm() <= 1e-8 * (1.0 + t.norm()),
            "case {case}: recovered transformation deviates by {}",
            (&derived - &t).norm()
        );
    }
}

#[test]
fn observable_quotient_realizes_the_same_process() {
    let mut rng = rng(99);
    for case in 0..10 {
        let n = 2 + case % 4;
        let obs_dim = 1 + rng.random_range(0..n - 1);
        let sys = random_structured_system(&mut rng, n, obs_dim, n, true);
        // Zero drift for the realization comparison.
        let sys = stochbisim::StochasticLinearSystem::new(
            sys.a().clone(),
            sys.b().clone(),
            sys.c().clone(),
            sys.g().clone(),
            DVector::zeros(sys.noise_dim()),
            sys.psi().clone(),
        )
        .unwrap();
        let (reduced, _, _) = minimal_external(&sys, tol()).unwrap();
        let report = check_same_realization(&sys, &reduced, tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds, "case {case}");
    }
}

#[test]
fn repeated_mode_reduction_and_relation_sum() {
    let sys = repeated_mode_system(0.5, 0.3);

    // The two stated relation presentations are both bisimulations of the
    // system with itself.
    let rel_a = LinearRelation::new(
        mat(2, 3, &[0.0, 0.0, 1.0, 1.0, -1.0, 0.0]),
        mat(2, 3, &[0.0, 0.0, 1.0, 1.0, -1.0, 0.0]),
    )
    .unwrap();
    let rel_b = LinearRelation::new(
        mat(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        mat(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
    )
    .unwrap();
    for rel in [&rel_a, &rel_b] {
        let report = check_bisimulation(&sys, &sys, rel, tol()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
    }

    // Their subspace sum matches the single-row kernel and fails h5.
    let summed = numlin::sum(
        &rel_a.kernel_stack(tol()),
        &rel_b.kernel_stack(tol()),
        tol(),
    )
    .unwrap();
    let single = LinearRelation::new(
        mat(1, 3, &[0.0, 0.0, 1.0]),
        mat(1, 3, &[0.0, 0.0, 1.0]),
    )
    .unwrap();
    assert!(numlin::subspaces_equal(&summed, &single.kernel_stack(tol()), tol()).unwrap());
    let report = check_bisimulation(&sys, &sys, &single, tol()).unwrap();
    assert_eq!(report.verdict, Verdict::Fails);

    // The reduction splits the repeated cluster and lands at dimension two.
    let (reduced, _, certificate, decomp) = minimal_bisim(&sys, tol()).unwrap();
    assert_eq!(reduced.state_dim(), 2);
    assert!(certificate.verified());
    let report = check_bisimulation(&reduced, &sys, &decomp.graph_relation(), tol()).unwrap();
    assert_eq!(report.verdict, Verdict::Holds);
}
