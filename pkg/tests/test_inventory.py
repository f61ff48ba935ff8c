import warnings
from collections import Counter

import pytest

from urbantree.data.inventory import parse_inventory, select_top_species
from urbantree.data.synthetic import CAMDEN_TOP6, make_inventory_csv

HEADER = "Identifier,Common Name,Latitude,Longitude,Height In Metres,Spread In Metres," \
         "Diameter In Centimetres At Breast Height,Maturity\n"


def test_five_rows_two_bad():
    text = HEADER + (
        "A1,London Plane,51.5414,-0.1425,20,10,60,Mature\n"
        "A2,Ash,,,5,3,20,Young\n"
        "A3,  common   lime ,51.5420,-0.1430,,,,\n"
        "A4,Vacant Plot,51.5430,-0.1440,,,,\n"
        "A5,Sycamore,51.5440,-0.1450,12.5,6,35,Mature\n"
    )
    records, rejected = parse_inventory(text)
    assert [r.id for r in records] == ["A1", "A3", "A5"]
    assert {(r.id, r.reason) for r in rejected} == {("A2", "missing location"), ("A4", "vacant plot")}
    assert records[1].species == "Common Lime"
    assert records[1].height is None
    assert records[2].dbh == 35.0


@pytest.mark.parametrize(
    "row, reason",
    [
        ("B1,Ash,abc,-0.14,,,,", "malformed location"),
        ("B1,Ash,95,-0.14,,,,", "location out of range"),
        ("B1,Unknown,51.5,-0.14,,,,", "unknown species"),
        ("B1,,51.5,-0.14,,,,", "unknown species"),
        ("B1,Ash,51.5,-0.14,tall,,,", "malformed numeric attribute"),
    ],
)
def test_rejection_reasons(row, reason):
    records, rejected = parse_inventory(HEADER + row + "\n")
    assert not records
    assert rejected[0].reason == reason


def test_custom_columns_and_delimiter():
    text = "tree;name;y;x\n1;Oak;51.5;-0.1\n"
    records, _ = parse_inventory(text, columns={"id": "tree", "species": "name", "latitude": "y",
                                                "longitude": "x"}, delimiter=";")
    assert records[0].species == "Oak" and records[0].latitude == 51.5


def test_missing_required_column():
    with pytest.raises(ValueError, match="Latitude"):
        parse_inventory("Identifier,Common Name,Longitude\n1,Ash,0\n")


def test_top_k_ties_by_name():
    text = HEADER + "".join(f"{i},{s},51.5,-0.1,,,,\n" for i, s in enumerate("CCBBAAD"))
    records, _ = parse_inventory(text)
    kept, top = select_top_species(records, 2)
    assert top == ["A", "B"]
    assert {r.species for r in kept} == {"A", "B"}


def test_fewer_species_than_k_warns():
    records, _ = parse_inventory(HEADER + "1,Ash,51.5,-0.1,,,,\n")
    with pytest.warns(UserWarning, match="fewer than k=6"):
        kept, top = select_top_species(records, 6)
    assert top == ["Ash"]


def test_planted_inventory():
    counts = dict(zip(CAMDEN_TOP6, [40, 32, 28, 24, 20, 16]))
    counts["Horse Chestnut"] = 10
    text, bad = make_inventory_csv(counts, n_missing_location=5, n_vacant=3, n_unknown=2, seed=1)
    records, rejected = parse_inventory(text)
    assert sorted(r.id for r in rejected) == sorted(bad)
    assert len(records) == sum(counts.values())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        kept, top = select_top_species(records, 6)
    assert top == list(CAMDEN_TOP6)
    assert Counter(r.species for r in kept) == {s: counts[s] for s in CAMDEN_TOP6}
