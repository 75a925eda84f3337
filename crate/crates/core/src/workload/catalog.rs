//! CSV ingestion and emission for catalogs and request traces.
//!
//! Schemas (header row required, integers base-10, UTF-8):
//! - `catalog.csv`: `object_id,instrument_id,region_id,data_kind,rate_bytes_per_s`
//! - `users.csv`: `user_id,org_id,x,y,home_dtn`
//! - `recipes.csv`: `product_kind,input_kind` (one row per input)
//! - `requests.csv`: `req_id,t_arrive_s,user_id,object_id,window_start_s,window_end_s,channel`

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::types::*;
use crate::{Error, Result};

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn field<'a>(
    path: &Path,
    rec: &'a csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| {
        Error::parse(
            path.display().to_string(),
            record_line(rec),
            format!("missing column {name}"),
        )
    })
}

fn parse_num<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = field(path, rec, idx, name)?;
    raw.trim().parse::<T>().map_err(|_| {
        Error::parse(
            path.display().to_string(),
            record_line(rec),
            format!("invalid {name}: {raw:?}"),
        )
    })
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = open_reader(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            Error::parse(path.display().to_string(), line, e.to_string())
        })?;
        rows.push(rec);
    }
    Ok(rows)
}

/// Loads and cross-validates a catalog from its three CSV files.
pub fn load_catalog(
    catalog_path: &Path,
    users_path: &Path,
    recipes_path: &Path,
) -> Result<Catalog> {
    let mut objects = Vec::new();
    for rec in read_rows(catalog_path)? {
        objects.push(DataObject {
            object_id: field(catalog_path, &rec, 0, "object_id")?.trim().to_string(),
            instrument_id: field(catalog_path, &rec, 1, "instrument_id")?.trim().to_string(),
            region_id: field(catalog_path, &rec, 2, "region_id")?.trim().to_string(),
            data_kind: field(catalog_path, &rec, 3, "data_kind")?.trim().to_string(),
            rate_bytes_per_s: parse_num(catalog_path, &rec, 4, "rate_bytes_per_s")?,
        });
    }

    let mut users = Vec::new();
    for rec in read_rows(users_path)? {
        users.push(UserProfile {
            user_id: field(users_path, &rec, 0, "user_id")?.trim().to_string(),
            org_id: field(users_path, &rec, 1, "org_id")?.trim().to_string(),
            coord: (
                parse_num(users_path, &rec, 2, "x")?,
                parse_num(users_path, &rec, 3, "y")?,
            ),
            home_dtn: field(users_path, &rec, 4, "home_dtn")?.trim().to_string(),
        });
    }

    // recipes.csv carries one row per (product, input); fold rows into recipes
    // preserving first-appearance order of products.
    let mut by_product: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in read_rows(recipes_path)? {
        let product = field(recipes_path, &rec, 0, "product_kind")?.trim().to_string();
        let input = field(recipes_path, &rec, 1, "input_kind")?.trim().to_string();
        by_product.entry(product).or_default().push(input);
    }
    let recipes = by_product
        .into_iter()
        .map(|(product_kind, mut input_kinds)| {
            input_kinds.sort();
            input_kinds.dedup();
            DerivationRecipe {
                product_kind,
                input_kinds,
            }
        })
        .collect();

    Catalog::new(objects, users, recipes)
}

/// Loads a request trace, resolving user/object references against `catalog`.
pub fn load_trace(path: &Path, catalog: &Catalog) -> Result<Vec<Request>> {
    let mut trace = Vec::new();
    for rec in read_rows(path)? {
        let line = record_line(&rec);
        let user_name = field(path, &rec, 2, "user_id")?.trim();
        let object_name = field(path, &rec, 3, "object_id")?.trim();
        let user = catalog
            .user_id(user_name)
            .ok_or_else(|| Error::UnknownUser(user_name.to_string()))?;
        let object = catalog
            .object_id(object_name)
            .ok_or_else(|| Error::UnknownObject(object_name.to_string()))?;
        let start: i64 = parse_num(path, &rec, 4, "window_start_s")?;
        let end: i64 = parse_num(path, &rec, 5, "window_end_s")?;
        if start >= end {
            return Err(Error::parse(
                path.display().to_string(),
                line,
                format!("window [{start}, {end}) is empty or reversed"),
            ));
        }
        let channel_raw = field(path, &rec, 6, "channel")?.trim();
        let channel = Channel::parse(channel_raw).ok_or_else(|| {
            Error::parse(
                path.display().to_string(),
                line,
                format!("invalid channel {channel_raw:?}"),
            )
        })?;
        trace.push(Request {
            req_id: field(path, &rec, 0, "req_id")?.trim().to_string(),
            t_arrive: parse_num(path, &rec, 1, "t_arrive_s")?,
            user,
            object,
            window: (start, end),
            channel,
        });
    }
    Ok(trace)
}

/// Serializes a trace to CSV. Output is byte-deterministic for a given trace.
pub fn write_trace<W: Write>(mut w: W, trace: &[Request], catalog: &Catalog) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<trace writer>", e);
    writeln!(
        w,
        "req_id,t_arrive_s,user_id,object_id,window_start_s,window_end_s,channel"
    )
    .map_err(io_err)?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.req_id,
            r.t_arrive,
            catalog.user(r.user).user_id,
            catalog.object(r.object).object_id,
            r.window.0,
            r.window.1,
            r.channel.as_str()
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn write_catalog_csv<W: Write>(mut w: W, catalog: &Catalog) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<catalog writer>", e);
    writeln!(w, "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s").map_err(io_err)?;
    for o in &catalog.objects {
        writeln!(
            w,
            "{},{},{},{},{}",
            o.object_id, o.instrument_id, o.region_id, o.data_kind, o.rate_bytes_per_s
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn write_users_csv<W: Write>(mut w: W, catalog: &Catalog) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<users writer>", e);
    writeln!(w, "user_id,org_id,x,y,home_dtn").map_err(io_err)?;
    for u in &catalog.users {
        writeln!(
            w,
            "{},{},{},{},{}",
            u.user_id, u.org_id, u.coord.0, u.coord.1, u.home_dtn
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn write_recipes_csv<W: Write>(mut w: W, catalog: &Catalog) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<recipes writer>", e);
    writeln!(w, "product_kind,input_kind").map_err(io_err)?;
    for r in &catalog.recipes {
        for input in &r.input_kinds {
            writeln!(w, "{},{}", r.product_kind, input).map_err(io_err)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("lfsim-cat-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn minimal_catalog_one_object_zero_users() {
        let dir = tmpdir("min");
        let cat = write_tmp(
            &dir,
            "catalog.csv",
            "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\nobj1,i1,r1,ctd,100\n",
        );
        let users = write_tmp(&dir, "users.csv", "user_id,org_id,x,y,home_dtn\n");
        let recipes = write_tmp(&dir, "recipes.csv", "product_kind,input_kind\n");
        let catalog = load_catalog(&cat, &users, &recipes).unwrap();
        assert_eq!(catalog.objects.len(), 1);
        assert_eq!(catalog.users.len(), 0);
    }

    #[test]
    fn zero_rate_is_validation_error() {
        let dir = tmpdir("rate0");
        let cat = write_tmp(
            &dir,
            "catalog.csv",
            "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\nobj1,i1,r1,ctd,0\n",
        );
        let users = write_tmp(&dir, "users.csv", "user_id,org_id,x,y,home_dtn\n");
        let recipes = write_tmp(&dir, "recipes.csv", "product_kind,input_kind\n");
        let err = load_catalog(&cat, &users, &recipes).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn salinity_recipe_folds_three_inputs() {
        let dir = tmpdir("recipe");
        let cat = write_tmp(
            &dir,
            "catalog.csv",
            "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\nobj1,i1,r1,ctd,100\n",
        );
        let users = write_tmp(&dir, "users.csv", "user_id,org_id,x,y,home_dtn\n");
        let recipes = write_tmp(
            &dir,
            "recipes.csv",
            "product_kind,input_kind\nsalinity,conductivity\nsalinity,temperature\nsalinity,depth\n",
        );
        let catalog = load_catalog(&cat, &users, &recipes).unwrap();
        assert_eq!(catalog.recipes.len(), 1);
        let r = &catalog.recipes[0];
        assert_eq!(r.product_kind, "salinity");
        assert_eq!(r.input_kinds.len(), 3);
        for kind in ["conductivity", "temperature", "depth"] {
            assert!(r.input_kinds.iter().any(|k| k == kind));
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tmpdir("badrow");
        let cat = write_tmp(
            &dir,
            "catalog.csv",
            "object_id,instrument_id,region_id,data_kind,rate_bytes_per_s\nobj1,i1,r1,ctd,100\nobj2,i1,r1,ctd,notanumber\n",
        );
        let users = write_tmp(&dir, "users.csv", "user_id,org_id,x,y,home_dtn\n");
        let recipes = write_tmp(&dir, "recipes.csv", "product_kind,input_kind\n");
        let err = load_catalog(&cat, &users, &recipes).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn trace_round_trips_through_csv() {
        let catalog = Catalog::new(
            vec![DataObject {
                object_id: "obj1".into(),
                instrument_id: "i1".into(),
                region_id: "r1".into(),
                data_kind: "ctd".into(),
                rate_bytes_per_s: 10,
            }],
            vec![UserProfile {
                user_id: "u1".into(),
                org_id: "o1".into(),
                coord: (0.0, 0.0),
                home_dtn: "dtn1".into(),
            }],
            vec![],
        )
        .unwrap();
        let trace = vec![Request {
            req_id: "r000000".into(),
            t_arrive: 10,
            user: UserId(0),
            object: ObjectId(0),
            window: (0, 3600),
            channel: Channel::Api,
        }];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, &catalog).unwrap();
        let dir = tmpdir("trace");
        let path = write_tmp(&dir, "requests.csv", std::str::from_utf8(&buf).unwrap());
        let loaded = load_trace(&path, &catalog).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].t_arrive, 10);
        assert_eq!(loaded[0].window, (0, 3600));
        assert_eq!(loaded[0].channel, Channel::Api);
    }

    #[test]
    fn trace_with_unknown_object_is_rejected() {
        let catalog = Catalog::new(vec![], vec![], vec![]).unwrap();
        let dir = tmpdir("dangling");
        let path = write_tmp(
            &dir,
            "requests.csv",
            "req_id,t_arrive_s,user_id,object_id,window_start_s,window_end_s,channel\nr0,0,u1,objX,0,10,api\n",
        );
        assert!(load_trace(&path, &catalog).is_err());
    }
}
