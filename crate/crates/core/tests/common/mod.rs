//! Test-only helpers shared by the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecasim::{SimConfig, Simulator, SlotKind, TraceRecord, Variant};

/// One slot as produced by the reference model.
#[derive(Debug, Clone, PartialEq)]
pub struct RefSlot {
    pub kind: char,
    pub transmitters: Vec<usize>,
    pub stages: Vec<u32>,
    pub duration_us: f64,
}

/// Two contenders written out longhand, with the default 802.11b-like
/// timing (20/50/10 us, 12000 bit payload, 400 bit header, 304 bit ACK,
/// 11 Mb/s), CW_min = 32 and maximum stage 5. Random draws come from the
/// same seeded ChaCha8 stream in the same order: initial draws node 0 then
/// node 1, and collision redraws node 0 then node 1.
pub fn reference_two_nodes(variant: &str, seed: u64, slots: usize) -> Vec<RefSlot> {
    let data = 12400.0 / 11.0;
    let ack = 304.0 / 11.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut b0: u32 = rng.gen_range(0..32);
    let mut b1: u32 = rng.gen_range(0..32);
    let mut k0: u32 = 0;
    let mut k1: u32 = 0;
    let fair = variant == "eca-hys-fs";
    let keep = variant == "eca-hys" || fair;

    let mut out = Vec::with_capacity(slots);
    for _ in 0..slots {
        let burst0 = if fair { 1u32 << k0 } else { 1 };
        let burst1 = if fair { 1u32 << k1 } else { 1 };
        if b0 > 0 && b1 > 0 {
            b0 -= 1;
            b1 -= 1;
            out.push(RefSlot { kind: 'E', transmitters: vec![], stages: vec![], duration_us: 20.0 });
        } else if b0 == 0 && b1 == 0 {
            let longest = burst0.max(burst1) as f64;
            out.push(RefSlot {
                kind: 'C',
                transmitters: vec![0, 1],
                stages: vec![k0, k1],
                duration_us: 50.0 + longest * data + 10.0 + ack,
            });
            k0 = if k0 < 5 { k0 + 1 } else { 5 };
            b0 = rng.gen_range(0..(32u32 << k0));
            k1 = if k1 < 5 { k1 + 1 } else { 5 };
            b1 = rng.gen_range(0..(32u32 << k1));
        } else {
            // exactly one of the two is due
            let first = b0 == 0;
            let (b, k, burst) = if first { (&mut b0, &mut k0, burst0) } else { (&mut b1, &mut k1, burst1) };
            out.push(RefSlot {
                kind: 'S',
                transmitters: vec![if first { 0 } else { 1 }],
                stages: vec![*k],
                duration_us: 50.0 + burst as f64 * (data + 10.0 + ack),
            });
            if !keep {
                *k = 0;
            }
            *b = match variant {
                "ca" => rng.gen_range(0..32),
                "eca" => 16,
                _ => (32u32 << *k) / 2,
            };
        }
    }
    out
}

pub fn engine_trace(variant: Variant, nodes: usize, seed: u64, slots: usize) -> Vec<TraceRecord> {
    let config = SimConfig { variant, nodes, seed, trace_enabled: true, ..Default::default() };
    let mut sim = Simulator::from_config(&config).unwrap();
    for _ in 0..slots {
        sim.step();
    }
    sim.trace().unwrap().to_vec()
}

/// First index at which the engine trace and the reference disagree.
pub fn first_mismatch(engine: &[TraceRecord], reference: &[RefSlot]) -> Option<usize> {
    if engine.len() != reference.len() {
        return Some(engine.len().min(reference.len()));
    }
    engine.iter().zip(reference).position(|(e, r)| {
        e.kind.code() != r.kind
            || e.transmitters != r.transmitters
            || e.stages != r.stages
            || (e.duration_us - r.duration_us).abs() > 1e-9
    })
}

/// Critical value of chi-square with 31 degrees of freedom at the 1% level,
/// from a printed table.
pub const CHI2_31_AT_1PCT: f64 = 52.191;

/// Pearson chi-square statistic of `draws` samples of `sample` over
/// `bins` equiprobable bins.
pub fn chi_square_uniform(bins: usize, draws: usize, mut sample: impl FnMut() -> usize) -> f64 {
    let mut counts = vec![0u64; bins];
    for _ in 0..draws {
        counts[sample()] += 1;
    }
    let expected = draws as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

pub fn kinds(trace: &[TraceRecord]) -> Vec<SlotKind> {
    trace.iter().map(|r| r.kind).collect()
}
