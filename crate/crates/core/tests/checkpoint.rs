use edudep::conllu::{parse_conllu, write_conllu, Edu};
use edudep::graph::Decoder;
use edudep::model::{Architecture, Hyper, Model, TrainOptions};
use edudep::synth::synthetic_corpus;
use edudep::Error;

fn hyper() -> Hyper {
    Hyper {
        word_dim: 6,
        pos_dim: 4,
        hidden_dim: 8,
        arc_dim: 6,
        mlp_hidden: 6,
        epochs: 3,
        seed: 21,
        ..Hyper::default()
    }
}

fn train(arch: Architecture, corpus: &[Edu]) -> Model {
    Model::train(arch, corpus, &hyper(), &TrainOptions::default()).unwrap().0
}

const ARCHS: [Architecture; 3] = [Architecture::Edp, Architecture::ImprovedEdp, Architecture::DeepBiaffine];

#[test]
fn save_load_round_trip() {
    let corpus = synthetic_corpus(20, 2, 10, 1).unwrap();
    let test = synthetic_corpus(10, 2, 10, 2).unwrap();
    for arch in ARCHS {
        let model = train(arch, &corpus);
        let bytes = model.to_bytes().unwrap();
        assert!(bytes.starts_with(b"EDUDEP-CHECKPOINT\t1\n"));
        let loaded = Model::load(&bytes[..]).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.to_bytes().unwrap(), bytes);
        for e in &test {
            assert_eq!(loaded.parse(e, None).unwrap(), model.parse(e, None).unwrap());
        }
    }
}

#[test]
fn training_is_deterministic() {
    let corpus = synthetic_corpus(20, 2, 10, 3).unwrap();
    for arch in ARCHS {
        assert_eq!(train(arch, &corpus).to_bytes().unwrap(), train(arch, &corpus).to_bytes().unwrap());
    }
    let other = Model::train(
        Architecture::Edp,
        &corpus,
        &Hyper { seed: 22, ..hyper() },
        &TrainOptions::default(),
    )
    .unwrap()
    .0;
    assert_ne!(other.to_bytes().unwrap(), train(Architecture::Edp, &corpus).to_bytes().unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let corpus = synthetic_corpus(10, 2, 6, 4).unwrap();
    let bytes = train(Architecture::ImprovedEdp, &corpus).to_bytes().unwrap();
    let text = String::from_utf8(bytes).unwrap();

    let wrong_version = text.replacen("EDUDEP-CHECKPOINT\t1", "EDUDEP-CHECKPOINT\t9", 1);
    assert!(matches!(Model::load(wrong_version.as_bytes()), Err(Error::Checkpoint(_))));

    let truncated = &text[..text.len() / 2];
    assert!(matches!(Model::load(truncated.as_bytes()), Err(Error::Checkpoint(_))));

    // claims a larger hidden layer than the stored tensors have
    let resized = text.replacen("\"hidden_dim\":8", "\"hidden_dim\":9", 1);
    assert_ne!(resized, text);
    assert!(matches!(Model::load(resized.as_bytes()), Err(Error::Checkpoint(_))));
}

#[test]
fn parse_output_is_rereadable() {
    let corpus = synthetic_corpus(25, 2, 14, 5).unwrap();
    let unannotated: Vec<Edu> = synthetic_corpus(15, 1, 14, 6)
        .unwrap()
        .iter()
        .map(|e| e.without_heads())
        .collect();
    for arch in ARCHS {
        let model = train(arch, &corpus);
        let decoders: &[Option<Decoder>] = if arch.is_transition() {
            &[None]
        } else {
            &[Some(Decoder::Eisner), Some(Decoder::Mst)]
        };
        for &decoder in decoders {
            let parsed: Vec<Edu> = unannotated
                .iter()
                .map(|e| e.with_heads(&model.parse(e, decoder).unwrap()).unwrap())
                .collect();
            let reread = parse_conllu(&write_conllu(&parsed).unwrap()).unwrap();
            assert_eq!(reread, parsed);
            for e in &reread {
                let heads = e.heads().unwrap();
                assert!(heads.is_tree());
                if decoder != Some(Decoder::Mst) {
                    assert!(heads.is_projective().unwrap());
                }
            }
        }
    }
}
