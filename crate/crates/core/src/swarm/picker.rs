//! Piece selection policies.

use rand::Rng;

use super::SwarmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PickerKind {
    #[default]
    RarestFirst,
    Random,
}

fn candidates(availability: &[u32], wanted: impl IntoIterator<Item = u32>) -> Vec<u32> {
    let mut c: Vec<u32> =
        wanted.into_iter().filter(|&p| availability.get(p as usize).is_some_and(|&a| a > 0)).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// Uniform choice among the wanted, available pieces with the lowest replica count.
pub fn rarest_first_pick<R: Rng + ?Sized>(
    availability: &[u32],
    wanted: impl IntoIterator<Item = u32>,
    rng: &mut R,
) -> Result<u32, SwarmError> {
    let c = candidates(availability, wanted);
    let min = c.iter().map(|&p| availability[p as usize]).min().ok_or(SwarmError::NothingWanted)?;
    let rarest: Vec<u32> = c.into_iter().filter(|&p| availability[p as usize] == min).collect();
    Ok(rarest[rng.gen_range(0..rarest.len())])
}

/// Uniform choice among the wanted, available pieces.
pub fn random_pick<R: Rng + ?Sized>(
    availability: &[u32],
    wanted: impl IntoIterator<Item = u32>,
    rng: &mut R,
) -> Result<u32, SwarmError> {
    let c = candidates(availability, wanted);
    if c.is_empty() {
        return Err(SwarmError::NothingWanted);
    }
    Ok(c[rng.gen_range(0..c.len())])
}

pub fn pick<R: Rng + ?Sized>(
    kind: PickerKind,
    availability: &[u32],
    wanted: impl IntoIterator<Item = u32>,
    rng: &mut R,
) -> Result<u32, SwarmError> {
    match kind {
        PickerKind::RarestFirst => rarest_first_pick(availability, wanted, rng),
        PickerKind::Random => random_pick(availability, wanted, rng),
    }
}
