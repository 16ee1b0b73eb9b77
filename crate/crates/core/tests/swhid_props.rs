use codevault::model::{Content, Directory, DirectoryEntry, EntryKind};
use codevault::swhid::{parse_swhid, print_swhid, swhid_for_node, LineRange, Qualifiers, SwhidError};
use codevault::{Node, ObjectId, ObjectType, Swhid, SwhidCore};
use proptest::prelude::*;

fn object_type() -> impl Strategy<Value = ObjectType> {
    prop::sample::select(ObjectType::ALL.to_vec())
}

fn core() -> impl Strategy<Value = SwhidCore> {
    (object_type(), any::<[u8; 20]>()).prop_map(|(t, id)| SwhidCore::new(t, ObjectId::from_bytes(id)))
}

fn snapshot_core() -> impl Strategy<Value = SwhidCore> {
    any::<[u8; 20]>().prop_map(|id| SwhidCore::new(ObjectType::Snapshot, ObjectId::from_bytes(id)))
}

fn lines() -> impl Strategy<Value = LineRange> {
    (1u64..1_000_000, prop::option::of(0u64..1000)).prop_map(|(start, extra)| LineRange {
        start,
        end: extra.map(|e| start + e),
    })
}

fn qualifiers() -> impl Strategy<Value = Qualifiers> {
    (
        prop::option::of("(https|git|svn)://[a-z]{1,8}\\.example/[a-zA-Z0-9;=%./_~-]{0,20}"),
        prop::option::of(snapshot_core()),
        prop::option::of(core()),
        prop::option::of(prop::collection::vec(any::<u8>(), 0..24).prop_map(|mut p| {
            p.insert(0, b'/');
            p
        })),
        prop::option::of(lines()),
    )
        .prop_map(|(origin, visit, anchor, path, lines)| Qualifiers {
            origin,
            visit,
            anchor,
            path,
            lines,
        })
}

fn swhid() -> impl Strategy<Value = Swhid> {
    (core(), qualifiers()).prop_map(|(core, qualifiers)| Swhid { core, qualifiers })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn print_then_parse_is_identity(s in swhid()) {
        let text = print_swhid(&s);
        let back = parse_swhid(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(print_swhid(&back), text);
    }

    #[test]
    fn core_text_is_fixed_width(c in core()) {
        let text = c.to_string();
        prop_assert_eq!(text.len(), 50);
        prop_assert!(text.starts_with("swh:1:"));
        prop_assert_eq!(text.parse::<SwhidCore>().unwrap(), c);
    }

    #[test]
    fn printed_qualifiers_never_leak_separators(s in swhid()) {
        let text = print_swhid(&s);
        let pieces = text.split(';').count();
        let expected = 1
            + usize::from(s.qualifiers.origin.is_some())
            + usize::from(s.qualifiers.visit.is_some())
            + usize::from(s.qualifiers.anchor.is_some())
            + usize::from(s.qualifiers.path.is_some())
            + usize::from(s.qualifiers.lines.is_some());
        prop_assert_eq!(pieces, expected);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,80}") {
        let _ = parse_swhid(&text);
    }

    #[test]
    fn uppercase_hex_is_rejected(c in core()) {
        let text = c.to_string();
        let upper = format!("{}{}", &text[..10], text[10..].to_uppercase());
        prop_assume!(upper != text);
        prop_assert!(parse_swhid(&upper).is_err());
    }

    #[test]
    fn content_swhid_is_git_blob_id(data in prop::collection::vec(any::<u8>(), 0..512)) {
        let node = Node::Content(Content::new(data.clone()));
        let mut header = format!("blob {}\0", data.len()).into_bytes();
        header.extend_from_slice(&data);
        let core = swhid_for_node(&node).unwrap();
        prop_assert_eq!(core.object_type, ObjectType::Content);
        prop_assert_eq!(core.id, ObjectId::sha1_of(&header));
    }
}

#[test]
fn malformed_identifiers() {
    let id = "94a9ed024d3859793618152ea559a168bbcbb5e2";
    type Check = fn(&SwhidError) -> bool;
    let cases: Vec<(String, Check)> = vec![
        (format!("swx:1:cnt:{id}"), |e| matches!(e, SwhidError::BadScheme(_))),
        (format!("swh:2:cnt:{id}"), |e| {
            matches!(e, SwhidError::UnsupportedVersion(_))
        }),
        (format!("swh:1:blb:{id}"), |e| matches!(e, SwhidError::UnknownType(_))),
        (format!("swh:1:cnt:{}", &id[1..]), |e| {
            matches!(e, SwhidError::InvalidId(_))
        }),
        (format!("swh:1:cnt:{id};colour=red"), |e| {
            matches!(e, SwhidError::UnknownQualifier(_))
        }),
        (format!("swh:1:cnt:{id};lines=1;lines=2"), |e| {
            matches!(e, SwhidError::DuplicateQualifier(_))
        }),
        (format!("swh:1:cnt:{id};path"), |e| {
            matches!(e, SwhidError::MalformedQualifier(_))
        }),
        (format!("swh:1:cnt:{id};lines=0"), |e| {
            matches!(e, SwhidError::InvalidQualifierValue { .. })
        }),
        (format!("swh:1:cnt:{id};lines=5-2"), |e| {
            matches!(e, SwhidError::InvalidQualifierValue { .. })
        }),
        (format!("swh:1:cnt:{id};path=relative"), |e| {
            matches!(e, SwhidError::InvalidQualifierValue { .. })
        }),
        (format!("swh:1:cnt:{id};visit=swh:1:rev:{id}"), |e| {
            matches!(e, SwhidError::InvalidQualifierValue { .. })
        }),
        (format!("swh:1:cnt:{id};path=/a%zz"), |e| {
            matches!(e, SwhidError::MalformedQualifier(_))
        }),
    ];
    for (text, expected) in cases {
        match parse_swhid(&text) {
            Err(e) => assert!(expected(&e), "{text}: unexpected {e:?}"),
            Ok(s) => panic!("{text} parsed as {s:?}"),
        }
    }
}

#[test]
fn directory_swhid_matches_intrinsic_id() {
    let blob = Node::Content(Content::new(b"hello\n".to_vec()));
    let blob_id = blob.intrinsic_id().unwrap();
    let dir = Node::Directory(
        Directory::new(vec![DirectoryEntry::new(
            b"hello.txt".to_vec(),
            EntryKind::File,
            blob_id,
        )])
        .unwrap(),
    );
    let core = swhid_for_node(&dir).unwrap();
    assert_eq!(core, SwhidCore::new(ObjectType::Directory, dir.intrinsic_id().unwrap()));
    // From `git hash-object` and `git write-tree` on the same file.
    assert_eq!(blob_id.to_hex(), "ce013625030ba8dba906f756967f9e9ca394464a");
    assert_eq!(core.id.to_hex(), "aaa96ced2d9a1c8e72c56b253a0e2fe78393feb7");
}
