use raftform_core::export::*;
use raftform_core::scenarios::{build_scenario, run, Overrides, RunRecord};

fn record() -> RunRecord {
    run(&build_scenario("F", &Overrides::parse("frames = 40").unwrap()).unwrap()).unwrap()
}

#[test]
fn csv_files_and_refusal_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let r = record();
    let paths = write_outputs(&r, dir.path(), Format::Csv, false, false).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["trajectories.csv", "errors.csv", "global.csv", "events.csv", "final.csv"]);
    let global = std::fs::read_to_string(dir.path().join("global.csv")).unwrap();
    assert_eq!(global.lines().count(), 41);
    assert!(matches!(write_outputs(&r, dir.path(), Format::Csv, false, false), Err(ExportError::Exists(_))));
    assert!(write_outputs(&r, dir.path(), Format::Csv, true, true).is_ok());
    assert!(dir.path().join("errors.svg").exists());
}

#[test]
fn json_carries_the_csv_values() {
    let r = record();
    let doc: serde_json::Value = serde_json::from_str(&to_json(&r)).unwrap();
    assert_eq!(doc["scenario"], "F");
    for table in tables(&r) {
        let rows = doc[table.name].as_array().unwrap();
        assert_eq!(rows.len(), table.rows.len(), "{}", table.name);
        let csv = table.to_csv();
        for (line, row) in csv.lines().skip(1).zip(rows) {
            for (field, key) in line.split(',').zip(table.header) {
                let value = &row[*key];
                match value {
                    serde_json::Value::String(s) => assert_eq!(s, field),
                    serde_json::Value::Number(n) => {
                        let parsed: f64 = field.parse().unwrap();
                        assert_eq!(n.as_f64().unwrap(), parsed, "{}.{key}", table.name);
                    }
                    other => panic!("unexpected {other}"),
                }
            }
        }
    }
}

#[test]
fn event_rows_use_labels() {
    let r = record();
    let events = tables(&r).into_iter().find(|t| t.name == "events").unwrap().to_csv();
    assert!(events.starts_with("type,node,term,frame\n"));
    assert!(events.contains("simulate failure,1,1,10\n"));
    assert!(events.contains("simulate recovery,1,1,20\n"));
}
