mod common;

use std::collections::BTreeMap;

use astrolabe_core::{compute_id, HashId, HashMode, Store, StoreError};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Atom(String),
    Nerve(String, Vec<usize>),
    Remove(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => "[a-d]{0,3}".prop_map(Op::Atom),
        4 => ("[a-d]{0,3}", prop::collection::vec(0usize..64, 1..5))
            .prop_map(|(r, picks)| Op::Nerve(r, picks)),
        2 => (0usize..64).prop_map(Op::Remove),
    ]
}

fn apply(store: &mut Store, op: &Op) -> Result<(), StoreError> {
    let ids: Vec<HashId> = store.ids().cloned().collect();
    match op {
        Op::Atom(r) => store.insert_atom(r).map(|_| ()),
        Op::Nerve(r, picks) if !ids.is_empty() => {
            let refs: Vec<HashId> = picks.iter().map(|p| ids[p % ids.len()].clone()).collect();
            store.insert_nerve(&format!("n:{r}"), &refs).map(|_| ())
        }
        Op::Remove(p) if !ids.is_empty() => store.remove_nerve(ids[p % ids.len()].as_str()).map(|_| ()),
        _ => Ok(()),
    }
}

fn is_id(s: &str) -> bool {
    s.len() == 12 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

#[test]
fn digests_match_published_vectors() {
    // Published SHA-256 test vectors.
    let vectors = [
        ("", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
        ("abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
        (
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
        ),
    ];
    for (record, full) in vectors {
        assert_eq!(compute_id(record).as_str(), &full[..12]);
    }
    assert_eq!(compute_id("").as_str(), "e3b0c44298fc");
    assert_eq!(compute_id("abc").as_str(), "ba7816bf8f01");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn operations_preserve_well_formedness(ops in prop::collection::vec(op(), 0..40)) {
        let mut store = Store::new(HashMode::Strict);
        for op in &ops {
            let before = store.clone();
            if apply(&mut store, op).is_err() {
                // rejected operations leave the store untouched
                prop_assert_eq!(&store, &before);
            }
            let report = store.validate();
            prop_assert!(report.is_well_formed, "{:?}", report.violations);
        }
        let text = store.to_canonical_json().unwrap();
        let back = Store::from_json_str(&text, HashMode::Strict).unwrap();
        prop_assert_eq!(&back, &store);
        prop_assert_eq!(back.to_canonical_json().unwrap(), text);
    }

    #[test]
    fn ids_are_stable_under_unrelated_edits(ops in prop::collection::vec(op(), 0..40)) {
        let mut store = Store::new(HashMode::Strict);
        let mut seen: BTreeMap<HashId, String> = BTreeMap::new();
        for op in &ops {
            let _ = apply(&mut store, op);
            for nerve in store.iter() {
                prop_assert!(is_id(nerve.id.as_str()));
                prop_assert_eq!(&compute_id(&nerve.record), &nerve.id);
                if let Some(record) = seen.get(&nerve.id) {
                    prop_assert_eq!(record, &nerve.record);
                }
                seen.insert(nerve.id.clone(), nerve.record.clone());
            }
        }
    }

    #[test]
    fn reinserting_is_idempotent(records in prop::collection::vec(".{0,8}", 1..10)) {
        let mut store = Store::new(HashMode::Strict);
        let first: Vec<HashId> = records.iter().map(|r| store.insert_atom(r).unwrap()).collect();
        let len = store.len();
        let second: Vec<HashId> = records.iter().map(|r| store.insert_atom(r).unwrap()).collect();
        prop_assert_eq!(first, second);
        prop_assert_eq!(store.len(), len);
    }
}
