use mmm_core::split::{default_train_size, split_train_test, SplitSpec};
use mmm_core::{DatasetId, Language, Sample, TaskWord};

use DatasetId::*;

/// Translated MMM corpus size and resulting test size per cell, in
/// ja / en / zh order.
const CELLS: [(DatasetId, [usize; 3], [usize; 3]); 7] = [
    (Scnm, [5343, 4449, 3177], [4343, 3449, 2177]),
    (ScposRw, [2000, 1312, 1406], [1000, 812, 906]),
    (ScposAdjN, [187528, 4801, 3937], [186528, 3801, 2937]),
    (ScposAdj, [187528, 9132, 7413], [186528, 8132, 6413]),
    (ScposN, [187528, 5027, 3920], [186528, 4027, 2920]),
    (Tcree, [2000, 1910, 1491], [1000, 1410, 991]),
    (Tconer, [6791, 45888, 9047], [4791, 43888, 7047]),
];

fn corpus(dataset: DatasetId, language: Language, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| Sample {
            id: format!("{dataset}-{language}-{i:06}"),
            dataset,
            language,
            text: "t".into(),
            task_word: TaskWord::new(dataset.default_task_word()).unwrap(),
            text_label: "x".into(),
            pairs: Vec::new(),
            meta: Default::default(),
        })
        .collect()
}

#[test]
fn default_sizes_reproduce_test_set_sizes() {
    for (dataset, totals, tests) in CELLS {
        for ((language, total), test) in Language::ALL.into_iter().zip(totals).zip(tests) {
            assert_eq!(
                total - default_train_size(dataset, language),
                test,
                "{dataset}/{language}"
            );
        }
    }
}

#[test]
fn splitting_small_cells_gives_the_expected_sizes() {
    let spec = SplitSpec::with_seed(11);
    for (dataset, totals, tests) in CELLS {
        for ((language, total), test) in Language::ALL.into_iter().zip(totals).zip(tests) {
            if total > 10_000 {
                continue;
            }
            let split = split_train_test(corpus(dataset, language, total), &spec).unwrap();
            assert_eq!(split.test.len(), test, "{dataset}/{language}");
        }
    }
}
