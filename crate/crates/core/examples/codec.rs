//! Writes a tensor as VTEN and a flow field as Middlebury `.flo`, then
//! reads both back.
//!
//! cargo run --example codec

use mgmask::flow::{read_flo, write_flo, FlowField};
use mgmask::tensor::{read_vten, write_vten, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    let t = Tensor::new(vec![2, 3], vec![0.0, 0.5, -1.25, 3.0, 1e-3, 42.0])?;
    let path = dir.path().join("x.vten");
    write_vten(&t, &path)?;
    let back = read_vten(&path)?;
    println!("vten {:?} -> {:?} ({} bytes)", t.dims(), back.data(), std::fs::metadata(&path)?.len());

    let f = FlowField::constant(4, 6, 1.5, -0.25);
    let path = dir.path().join("flow_1_2.flo");
    write_flo(&f, &path)?;
    let back = read_flo(&path)?;
    println!("flo {}x{} at (3, 2) = {:?}", back.height(), back.width(), back.at(3, 2));
    assert_eq!(back, f);
    Ok(())
}
