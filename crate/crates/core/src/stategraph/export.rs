//! Plain-text graph exports: a sparse transition list and a per-state CSV.

use std::io::{self, Write};

use super::StateGraph;

/// Header `STATES <n> TRANSITIONS <m> ABSORBING <idx>` (`-` when open), then
/// one `src reaction dst rate` line per transition. `n` counts every node.
pub fn write_transitions<W: Write>(graph: &StateGraph, mut out: W) -> io::Result<()> {
    let absorbing = graph
        .absorbing_index()
        .map_or_else(|| "-".to_string(), |a| a.to_string());
    writeln!(
        out,
        "STATES {} TRANSITIONS {} ABSORBING {}",
        graph.len(),
        graph.transitions().len(),
        absorbing
    )?;
    for t in graph.transitions() {
        writeln!(out, "{} {} {} {:e}", t.source, t.reaction, t.target, t.rate)?;
    }
    Ok(())
}

/// `index,<species...>,kappa`. The absorbing node is omitted; `kappa` is
/// empty for graphs built without indicators.
pub fn write_states_csv<W: Write>(
    graph: &StateGraph,
    species: &[String],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "index,{},kappa", species.join(","))?;
    for (i, s) in graph.states().iter().enumerate() {
        write!(out, "{i}")?;
        for c in s.counts() {
            write!(out, ",{c}")?;
        }
        match graph.kappa().get(i) {
            Some(k) => writeln!(out, ",{k:e}")?,
            None => writeln!(out, ",")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::stategraph::{build_bounded_reference, SpeciesBounds};

    #[test]
    fn birth_death_exports() {
        let m = parse_model("species X = 0\nreaction b: {X: 1} @ 2\nreaction d: {X: -1} @ [X]\n")
            .unwrap();
        let g = build_bounded_reference(&m, &SpeciesBounds::new(&m, &[("X", 1)]).unwrap(), 10)
            .unwrap();
        let mut buf = Vec::new();
        write_transitions(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "STATES 3 TRANSITIONS 3 ABSORBING 2\n0 0 1 2e0\n1 0 2 2e0\n1 1 0 1e0\n"
        );
        let mut buf = Vec::new();
        write_states_csv(&g, &m.species_names(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,X,kappa\n0,0,\n1,1,\n");
    }
}
