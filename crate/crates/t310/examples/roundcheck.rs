use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use t310::keyspace::*;
use t310::lincrypt::*;

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for (id, lane) in [(WeakClassId::C21D5, 21u8), (WeakClassId::C29D6, 29u8), (WeakClassId::C25D6, 25u8)] {
        let key = construct_weak(&ClassRequest::new(id), &mut rng).unwrap();
        let prop = LinearProperty {
            name: format!("{}-7r", id.name()),
            rounds: 7,
            input_mask: vec![lane],
            output_mask: vec![lane],
            aux: vec![(AuxSymbol::F, 7)],
            claimed_bias_log2: None,
            class: Some(id),
        };
        let est = measure_bias(&prop, &key, 300_000, &mut rng);
        println!("{}: bias {:+.5} (2^{:.2}), sigma {:.1}", id.name(), est.bias,
                 est.bias.abs().log2(), est.bias.abs() / est.stderr);
    }
}
