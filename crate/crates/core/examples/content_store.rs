//! Snapshots a small source tree twice, shows that unchanged files share
//! objects, then pins the latest commit and garbage-collects the rest.

use devchain::castore::CaStore;
use devchain::ledger::MemberId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = CaStore::open(dir.path())?;
    let author = MemberId::default();

    let big = vec![7u8; 600 * 1024];
    let v1 = store.put_files([
        ("README.md", b"shop\n".as_slice()),
        ("src/main.rs", b"fn main() {}\n".as_slice()),
        ("assets/logo.bin", big.as_slice()),
    ])?;
    let c1 = store.commit(None, v1, author, "initial import", 1)?;
    println!("commit {c1}\n  tree {v1}, {} objects stored", store.list_objects()?.len());

    let v2 = store.put_files([
        ("README.md", b"shop, now with a cart\n".as_slice()),
        ("src/main.rs", b"fn main() {}\n".as_slice()),
        ("assets/logo.bin", big.as_slice()),
    ])?;
    let c2 = store.commit(Some(c1), v2, author, "describe the cart", 2)?;
    println!("commit {c2}\n  tree {v2}, {} objects stored", store.list_objects()?.len());

    for (path, cid, size) in store.list_files(&v2)? {
        println!("  {path:<16} {size:>7} B  {cid}");
    }
    for (cid, commit) in store.log(&c2)? {
        println!("log {} {}", &cid.render()[..19], commit.message);
    }

    // A pinned commit keeps its whole history. Pinning only the latest tree
    // lets gc drop both commits, the first tree and the old README.
    store.pin(&v2)?;
    let report = store.gc()?;
    println!("gc removed {} objects, retained {}", report.removed.len(), report.retained);
    println!("logo intact: {}", store.get(&store.resolve_path(&v2, "assets/logo.bin")?)? == big);
    Ok(())
}
