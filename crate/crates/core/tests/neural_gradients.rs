use matfun::neural::gradcheck::{model_suite, primitive_suite};

const CONFIGS: usize = 20;
const TOL: f64 = 1e-4;

#[test]
fn primitives_match_finite_differences() {
    for case in primitive_suite(CONFIGS, 11) {
        println!(
            "{:<20} {:.2e} ({} entries, {} at kinks)",
            case.name, case.max_rel_error, case.checked_entries, case.kink_entries
        );
        assert!(case.max_rel_error <= TOL, "{} rel error {:e}", case.name, case.max_rel_error);
        assert!(case.kink_entries * 50 <= case.checked_entries, "{}: too many kink entries", case.name);
    }
}

#[test]
fn models_match_finite_differences() {
    for case in model_suite(CONFIGS, 12) {
        println!(
            "{:<20} {:.2e} ({} entries, {} at kinks)",
            case.name, case.max_rel_error, case.checked_entries, case.kink_entries
        );
        assert!(case.max_rel_error <= TOL, "{} rel error {:e}", case.name, case.max_rel_error);
        assert!(case.kink_entries * 50 <= case.checked_entries, "{}: too many kink entries", case.name);
    }
}
