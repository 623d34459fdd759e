//! Function descriptors for `--instance`.

use anyhow::{anyhow, bail};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qgt_core::boolfn::BooleanFunction;
use qgt_core::instances::{addressing_function, random_function, random_k_junta};
use qgt_core::subset;

fn num(s: &str, what: &str) -> anyhow::Result<usize> {
    s.trim().parse().map_err(|e| anyhow!("bad {what} `{s}`: {e}"))
}

fn elements(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| num(p, "element")).collect()
}

fn mask(n: usize, s: &str) -> anyhow::Result<u64> {
    let e = elements(s)?;
    if e.iter().any(|&j| j == 0 || j > n) {
        bail!("elements must lie in 1..={n}");
    }
    Ok(subset::from_elements(&e))
}

/// Parses `kind:args`; random kinds draw from `seed`.
///
/// `parity:N:S`, `and:N:S`, `const:N:±1`, `random:N`, `junta:N:K`,
/// `addressing:N_ADDR:G` and `table:BITS`, where `S` and `G` are comma lists.
pub fn parse(desc: &str, seed: u64) -> anyhow::Result<BooleanFunction> {
    let parts: Vec<&str> = desc.split(':').collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = match parts.as_slice() {
        ["parity", n, s] => {
            let n = num(n, "n")?;
            BooleanFunction::parity(n, mask(n, s)?)?
        }
        ["and", n, s] => {
            let n = num(n, "n")?;
            BooleanFunction::and(n, mask(n, s)?)?
        }
        ["const", n, v] => {
            let sign = match v.trim() {
                "1" | "+1" => 1,
                "-1" => -1,
                other => bail!("constant must be +1 or -1, got `{other}`"),
            };
            BooleanFunction::constant(num(n, "n")?, sign)?
        }
        ["random", n] => random_function(num(n, "n")?, &mut rng)?,
        ["junta", n, k] => {
            let (n, k) = (num(n, "n")?, num(k, "k")?);
            if k > n {
                bail!("need k <= n");
            }
            let core = random_function(k, &mut rng)?;
            let mut elems: Vec<usize> = (1..=n).collect();
            rand::seq::SliceRandom::shuffle(elems.as_mut_slice(), &mut rng);
            random_k_junta(n, &core, subset::from_elements(&elems[..k]))?
        }
        ["addressing", n, g] => addressing_function(&elements(g)?, num(n, "n_addr")?)?,
        ["table", bits] => {
            let len = bits.len();
            if !len.is_power_of_two() {
                bail!("table length must be a power of two");
            }
            BooleanFunction::parse_table(&format!("n={}\n{bits}", len.trailing_zeros()))?
        }
        _ => bail!("unknown instance descriptor `{desc}`"),
    };
    Ok(f)
}
