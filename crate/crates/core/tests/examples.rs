macro_rules! example_test {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                run_example().expect(concat!($file, " should run"));
            }
        }
    };
}

example_test!(interactions, "interactions.rs");
example_test!(exact_oracle, "exact_oracle.rs");
example_test!(gaussian_covariance, "gaussian_covariance.rs");
example_test!(sampler, "sampler.rs");
example_test!(random_walk, "random_walk.rs");
example_test!(decay_fits, "decay_fits.rs");
example_test!(localization, "localization.rs");
example_test!(two_point, "two_point.rs");
example_test!(avoidance, "avoidance.rs");
example_test!(lemma_suite, "lemma_suite.rs");
example_test!(run_config, "run_config.rs");
