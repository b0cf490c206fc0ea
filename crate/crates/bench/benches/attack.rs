use criterion::{criterion_group, criterion_main, Criterion};
use ipesim::attack::{AttackConfig, Attacker};
use ipesim::fixtures;
use ipesim::keyrec;
use ipesim::machine::MachineState;

fn victim_run(c: &mut Criterion) {
    let a = fixtures::build("aes_keyexpand");
    let entry = a.image.entry;
    c.bench_function("victim_full_run", |b| {
        b.iter(|| {
            let mut state = MachineState::new();
            a.image.load(&mut state, 0x2C00).unwrap();
            let attacker = Attacker::new(AttackConfig::new(entry, entry + 2, 1));
            attacker.install(&mut state).unwrap();
            ipesim::attack::restore_run(&attacker, &mut state).unwrap();
            state.cycles
        })
    });
}

fn phase1(c: &mut Criterion) {
    let a = fixtures::build("loop_counter");
    let entry = a.image.entry;
    c.bench_function("phase1_loop_counter", |b| {
        b.iter(|| {
            let mut state = MachineState::new();
            a.image.load(&mut state, 0x2C00).unwrap();
            let attacker = Attacker::new(AttackConfig::new(entry, entry + 2, 10_000));
            attacker.phase1_collect(&mut state, "bench").unwrap().len()
        })
    });
}

fn key_inversion(c: &mut Criterion) {
    let key = *b"0123456789abcdef";
    let w = keyrec::expand_key(&key);
    let obs = keyrec::RoundKeyObservation {
        round_index: 10,
        words: [w[40], w[41], w[42], w[43]],
        tail: Some(w[3]),
    };
    c.bench_function("key_schedule_inversion", |b| {
        b.iter(|| keyrec::recover_master_key(&obs).unwrap())
    });
}

criterion_group!(benches, victim_run, phase1, key_inversion);
criterion_main!(benches);
