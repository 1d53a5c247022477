//! Helpers shared by the training-heavy integration targets.
#![allow(dead_code)]

use aai_core::corpus::{make_splits, Utterance, DEFAULT_RATIOS};
use aai_core::synth::{gen_utterances, SynthSpec};
use aai_core::training::SubjectData;

/// In-memory synthetic utterances for every subject of `spec`.
pub fn synth_subjects(spec: &SynthSpec) -> Vec<Vec<Utterance<f64>>> {
    let mut out: Vec<Vec<Utterance<f64>>> = vec![Vec::new(); spec.subjects];
    for (i, u) in gen_utterances(spec).unwrap().into_iter().enumerate() {
        let utt = Utterance::new(u.subject, u.sentence, u.features, u.targets).unwrap();
        out[i / spec.utterances_per_subject].push(utt);
    }
    out
}

/// Splits every subject with the same 80/10/10 sentence partition.
pub fn split_subjects(spec: &SynthSpec, subjects: Vec<Vec<Utterance<f64>>>) -> Vec<SubjectData<f64>> {
    let ids: Vec<u32> = (1..=spec.utterances_per_subject as u32).collect();
    let split = make_splits(&ids, DEFAULT_RATIOS, spec.split_seed).unwrap();
    subjects
        .into_iter()
        .map(|utts| {
            let subject = utts[0].subject.clone();
            let pick = |ids: &[u32]| utts.iter().filter(|u| ids.contains(&u.sentence)).cloned().collect::<Vec<_>>();
            SubjectData { subject, train: pick(&split.train), val: pick(&split.val), test: pick(&split.test) }
        })
        .collect()
}
