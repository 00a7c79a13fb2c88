import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iterforge.assets import AnnotationObject, AssetStore, import_dataset
from iterforge.errors import IntegrityError, NotFoundError, ValidationError

CAT_DOG = ["cat", "dog"]


def put_n(store, payloads):
    return [store.put_asset(p, source_name=f"f{i}") for i, p in enumerate(payloads)]


class TestPutAsset:
    def test_empty_payload_sha256(self, store):
        # oracle: hashlib.sha256(b"").hexdigest()
        assert (
            store.put_asset(b"")
            == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        )

    def test_dedup_identical_payload(self, store):
        payload = b"x" * 1024
        a = store.put_asset(payload, "one.bin")
        b = store.put_asset(payload, "two.bin")
        assert a == b
        assert store.blob_count() == 1

    def test_one_byte_difference_distinct_ids(self, store):
        p1 = b"a" * 100
        p2 = b"a" * 99 + b"b"
        i1, i2 = put_n(store, [p1, p2])
        assert i1 != i2
        assert i1 == hashlib.sha256(p1).hexdigest()
        assert i2 == hashlib.sha256(p2).hexdigest()

    def test_empty_rejected_when_disabled(self, tmp_path):
        s = AssetStore(tmp_path / "s", allow_empty_assets=False)
        with pytest.raises(ValidationError):
            s.put_asset(b"")
        s.close()

    def test_record_matches_blob(self, store):
        aid = store.put_asset(b"hello", "h.bin")
        rec = store.get_record(aid)
        assert rec.byte_size == 5
        assert rec.source_name == "h.bin"
        assert store.get_blob(aid) == b"hello"


class TestCommitSnapshot:
    def test_lineage_walk(self, store):
        (a,) = put_n(store, [b"a"])
        root = store.commit_snapshot([], {a: []}, "import", CAT_DOG)
        child = store.commit_snapshot([root], {a: []}, "t1", CAT_DOG)
        grand = store.commit_snapshot([child], {a: []}, "t2", CAT_DOG)
        assert store.lineage(grand) == [child, root]

    def test_unstored_asset_rejected(self, store):
        bogus = "0" * 64
        with pytest.raises(IntegrityError):
            store.commit_snapshot([], {bogus: []}, "import", CAT_DOG)

    def test_duplicate_entries_rejected(self, store):
        (a,) = put_n(store, [b"a"])
        with pytest.raises(IntegrityError):
            store.commit_snapshot([], [(a, []), (a, [])], "import", CAT_DOG)

    def test_bad_class_id_rejected(self, store):
        (a,) = put_n(store, [b"a"])
        anns = [AnnotationObject(5, 0, 0, 1, 1)]
        with pytest.raises(ValidationError):
            store.commit_snapshot([], {a: anns}, "import", CAT_DOG)

    def test_reload_round_trip(self, store, tmp_path):
        ids = put_n(store, [b"a", b"b", b"c"])
        anns = [AnnotationObject(0, 0.1, 0.1, 0.5, 0.5)]
        root = store.commit_snapshot([], {ids[0]: anns, ids[1]: []}, "import", CAT_DOG)
        child = store.commit_snapshot([root], {ids[2]: []}, "op", CAT_DOG)

        reloaded = AssetStore(store.root)
        for sid in (root, child):
            orig = store.get_snapshot(sid)
            got = reloaded.get_snapshot(sid)
            assert got.entries == orig.entries
            assert got.parent_ids == orig.parent_ids
            assert got.content_digest() == orig.content_digest()
        assert reloaded.get_blob(ids[0]) == b"a"
        reloaded.close()

    def test_digest_stable_after_more_commits(self, store):
        ids = put_n(store, [b"a", b"b"])
        sid = store.commit_snapshot([], {ids[0]: []}, "import", CAT_DOG)
        before = store.get_snapshot(sid).content_digest()
        store.commit_snapshot([sid], {ids[1]: []}, "op", CAT_DOG)
        assert store.get_snapshot(sid).content_digest() == before


class TestPaging:
    @pytest.fixture
    def snap5(self, store):
        ids = put_n(store, [bytes([i]) for i in range(5)])
        sid = store.commit_snapshot([], {i: [] for i in ids}, "import", CAT_DOG)
        return sid, ids

    def test_first_page(self, store, snap5):
        sid, ids = snap5
        page = store.list_page(sid, 0, 2)
        assert [r.id for r, _ in page] == ids[:2]

    def test_tail_page(self, store, snap5):
        sid, ids = snap5
        page = store.list_page(sid, 4, 10)
        assert [r.id for r, _ in page] == ids[4:]

    def test_offset_past_end(self, store, snap5):
        sid, _ = snap5
        assert store.list_page(sid, 5, 3) == []

    def test_deterministic(self, store, snap5):
        sid, _ = snap5
        assert store.list_page(sid, 1, 3) == store.list_page(sid, 1, 3)

    def test_bad_limit(self, store, snap5):
        sid, _ = snap5
        with pytest.raises(ValidationError):
            store.list_page(sid, 0, 0)

    def test_unknown_snapshot(self, store):
        with pytest.raises(NotFoundError):
            store.list_page("f" * 32, 0, 1)

    @given(limit=st.integers(min_value=1, max_value=7), n=st.integers(min_value=0, max_value=20))
    @settings(max_examples=30, deadline=None)
    def test_pages_concatenate_exactly(self, tmp_path_factory, limit, n):
        store = AssetStore(tmp_path_factory.mktemp("pg") / "s")
        ids = put_n(store, [b"p%d" % i for i in range(n)])
        sid = store.commit_snapshot([], {i: [] for i in ids}, "import", [])
        walked = []
        off = 0
        while True:
            page = store.list_page(sid, off, limit)
            walked.extend(r.id for r, _ in page)
            if not page:
                break
            off += limit
        assert walked == ids
        store.close()


class TestGetDetail:
    def test_present(self, store):
        (a,) = put_n(store, [b"a"])
        anns = [AnnotationObject(1, 0, 0, 2, 2)]
        sid = store.commit_snapshot([], {a: anns}, "import", CAT_DOG)
        rec, got = store.get_asset_detail(sid, a)
        assert rec.id == a
        assert got == anns

    def test_absent(self, store):
        (a,) = put_n(store, [b"a"])
        sid = store.commit_snapshot([], {a: []}, "import", CAT_DOG)
        with pytest.raises(NotFoundError):
            store.get_asset_detail(sid, "1" * 64)


class TestImportYolo:
    def _write(self, d, name, data, ann=None):
        (d / name).write_bytes(data)
        if ann is not None:
            (d / name).with_suffix(".txt").write_text(ann)

    def test_dedup_two_identical_images(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        self._write(d, "a.img", b"same", "0 0.5 0.5 0.2 0.2\n")
        self._write(d, "b.img", b"same", "1 0.5 0.5 0.2 0.2\n")
        self._write(d, "c.img", b"other")
        sid, stats = import_dataset(store, d, "yolo-txt", "ignore", CAT_DOG)
        snap = store.get_snapshot(sid)
        assert len(snap) == 2
        assert store.blob_count() == 2

    def test_unknown_class_ignore(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        self._write(d, "a.img", b"x", "7 0.5 0.5 0.2 0.2\n")
        sid, stats = import_dataset(store, d, "yolo-txt", "ignore", CAT_DOG)
        snap = store.get_snapshot(sid)
        assert len(snap) == 1
        assert list(snap.entries.values()) == [[]]
        assert stats.objects_dropped == 1

    def test_unknown_class_abort(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        self._write(d, "a.img", b"x", "7 0.5 0.5 0.2 0.2\n")
        with pytest.raises(ValidationError):
            import_dataset(store, d, "yolo-txt", "abort", CAT_DOG)
        assert store.list_snapshot_ids() == []
        assert store.blob_count() == 0

    def test_box_conversion(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        self._write(d, "a.img", b"x", "1 0.5 0.5 0.2 0.4\n")
        sid, _ = import_dataset(store, d, "yolo-txt", "ignore", CAT_DOG)
        (anns,) = store.get_snapshot(sid).entries.values()
        (ann,) = anns
        assert ann.class_id == 1
        assert ann.x_min == pytest.approx(0.4)
        assert ann.y_min == pytest.approx(0.3)
        assert ann.x_max == pytest.approx(0.6)
        assert ann.y_max == pytest.approx(0.7)

    def test_malformed_file_counted_and_skipped(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        self._write(d, "a.img", b"x", "not a yolo line\n")
        self._write(d, "b.img", b"y", "0 0.5 0.5 0.2 0.2\n")
        sid, stats = import_dataset(store, d, "yolo-txt", "ignore", CAT_DOG)
        assert stats.files_failed == 1
        assert len(store.get_snapshot(sid)) == 2


class TestImportVoc:
    VOC = (
        "<annotation><object><name>{name}</name>"
        "<bndbox><xmin>1</xmin><ymin>2</ymin><xmax>30</xmax><ymax>40</ymax></bndbox>"
        "</object></annotation>"
    )

    def test_parse_and_extras_ignored(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        (d / "a.img").write_bytes(b"x")
        (d / "a.xml").write_text(
            "<annotation><size><width>99</width></size>"
            "<object><name>dog</name><pose>ignored</pose>"
            "<bndbox><xmin>1</xmin><ymin>2</ymin><xmax>30</xmax><ymax>40</ymax></bndbox>"
            "</object></annotation>"
        )
        sid, _ = import_dataset(store, d, "voc-xml-subset", "ignore", CAT_DOG)
        (anns,) = store.get_snapshot(sid).entries.values()
        assert anns == [AnnotationObject(1, 1.0, 2.0, 30.0, 40.0)]

    def test_policy_add_appends_class(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        (d / "a.img").write_bytes(b"x")
        (d / "a.xml").write_text(self.VOC.format(name="bird"))
        sid, _ = import_dataset(store, d, "voc-xml-subset", "add", CAT_DOG)
        snap = store.get_snapshot(sid)
        assert snap.class_names == ["cat", "dog", "bird"]
        (anns,) = snap.entries.values()
        assert anns[0].class_id == 2


class TestImportFlat:
    def test_all_files_unlabeled(self, store, tmp_path):
        d = tmp_path / "src"
        d.mkdir()
        for i in range(3):
            (d / f"f{i}.bin").write_bytes(b"payload%d" % i)
        sid, stats = import_dataset(store, d, "flat-unlabeled")
        snap = store.get_snapshot(sid)
        assert len(snap) == 3
        assert all(a == [] for a in snap.entries.values())
        assert stats.assets_imported == 3


def test_reimport_same_directory_adds_no_blobs(store, tmp_path):
    d = tmp_path / "src"
    d.mkdir()
    for i in range(4):
        (d / f"f{i}.bin").write_bytes(b"data%d" % i)
    import_dataset(store, d, "flat-unlabeled")
    before = store.blob_count()
    import_dataset(store, d, "flat-unlabeled")
    assert store.blob_count() == before
