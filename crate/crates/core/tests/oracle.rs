#[path = "support/dense_oracle.rs"]
mod dense_oracle;

use nudgeflow_core::transport::MassKind;

#[test]
fn coarse_step_matches_dense_assembly_consistent_mass() {
    dense_oracle::check(MassKind::Consistent);
}

#[test]
fn coarse_step_matches_dense_assembly_lumped_mass() {
    dense_oracle::check(MassKind::Lumped);
}
