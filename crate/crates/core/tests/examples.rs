//! Every example runs to completion.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(check_consistency, "../examples/check_consistency.rs");
example!(repair_translation, "../examples/repair_translation.rs");
example!(train_denoiser, "../examples/train_denoiser.rs");
example!(guided_sampling, "../examples/guided_sampling.rs");
example!(evaluate_corpus, "../examples/evaluate_corpus.rs");
example!(parameter_sweep, "../examples/parameter_sweep.rs");
example!(table_arithmetic, "../examples/table_arithmetic.rs");
example!(remote_backend, "../examples/remote_backend.rs");
