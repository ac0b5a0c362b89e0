//! Line-oriented text form of a factor graph, one variable or factor per
//! line, tab separated:
//!
//! ```text
//! V    <id>    <name>
//! F    <id>    <kind>    <scope ids, comma separated>    <table entries, space separated>
//! ```
//!
//! Binary tables are written row-major. Floats use the shortest
//! representation that round-trips exactly.

use std::io::{BufRead, Write};

use super::{FactorGraph, FactorKind, GraphError, PotentialTable, VarId};

const HEADER: &str = "# factor graph v1";

pub fn write_dump<W: Write>(graph: &FactorGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for v in graph.variables() {
        writeln!(out, "V\t{}\t{}", v.id.0, v.name)?;
    }
    for f in graph.factors() {
        let scope: Vec<String> = f.scope.iter().map(|v| v.0.to_string()).collect();
        let table: Vec<String> = f.table.entries().iter().map(|x| format!("{x:?}")).collect();
        writeln!(
            out,
            "F\t{}\t{}\t{}\t{}",
            f.id.0,
            f.kind,
            scope.join(","),
            table.join(" ")
        )?;
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<FactorGraph, GraphError> {
    let mut graph = FactorGraph::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |msg: String| GraphError::Parse { line: lineno, msg };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["V", id, name] => {
                let id: usize = id.parse().map_err(|_| err(format!("bad variable id `{id}`")))?;
                if id != graph.num_variables() {
                    return Err(err(format!("variable id {id} out of sequence")));
                }
                graph.add_variable(*name);
            }
            ["F", id, kind, scope, table] => {
                let id: usize = id.parse().map_err(|_| err(format!("bad factor id `{id}`")))?;
                if id != graph.num_factors() {
                    return Err(err(format!("factor id {id} out of sequence")));
                }
                let kind: FactorKind = kind.parse().map_err(|e: GraphError| err(e.to_string()))?;
                let scope = scope
                    .split(',')
                    .map(|s| s.parse().map(VarId))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err(format!("bad scope `{scope}`")))?;
                let values = table
                    .split(' ')
                    .map(str::parse::<f64>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err(format!("bad table `{table}`")))?;
                let table = match values.len() {
                    3 => PotentialTable::unary([values[0], values[1], values[2]]),
                    9 => {
                        let mut m = [[0.0; 3]; 3];
                        for (k, v) in values.iter().enumerate() {
                            m[k / 3][k % 3] = *v;
                        }
                        PotentialTable::binary(m)
                    }
                    n => return Err(err(format!("table has {n} entries, expected 3 or 9"))),
                }
                .map_err(|e| err(e.to_string()))?;
                graph
                    .add_factor(kind, &scope, table)
                    .map_err(|e| err(e.to_string()))?;
            }
            _ => return Err(err("expected a V or F record".into())),
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut g = FactorGraph::new();
        let a = g.add_variable("O:size:ant|zebra");
        let b = g.add_variable("F:size:threw:dobj:-");
        g.add_factor(FactorKind::Emb, &[a], PotentialTable::unary([0.1, 0.2, 1.0 / 3.0]).unwrap())
            .unwrap();
        g.add_factor(
            FactorKind::SelPref,
            &[b, a],
            PotentialTable::binary([[0.7, 0.1, 0.2], [0.15, 0.7, 0.15], [0.2, 0.1, 0.7]]).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dump(&g, &mut buf).unwrap();
        let back = read_dump(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut again = Vec::new();
        write_dump(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "# factor graph v1\nV\t0\ta\nF\t0\tseed\t0\t1 2\n";
        match read_dump(text.as_bytes()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "V\t0\ta\nF\t0\tbogus\t0\t1 2 3\n";
        assert!(read_dump(text.as_bytes()).is_err());
    }
}
