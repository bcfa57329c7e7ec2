import pytest

from fopid_avr.tables import load_table, read_gene_rows, table_row


@pytest.mark.parametrize("n,rows", [(1, 6), (2, 6)])
def test_shipped_tables_load(n, rows):
    table = load_table(n)
    assert len(table) == rows
    assert all(r.genes.in_bounds() for r in table)


@pytest.mark.parametrize("n", range(1, 7))
def test_every_table_parses(n):
    assert load_table(n)


def test_row_values_transcribed():
    a1 = table_row(1, "A1")
    assert a1.mode == "fopid"
    assert (a1.genes.Kp, a1.genes.lam) == (2.05111, 0.70557)
    b4 = table_row(2, "B4")
    assert b4.mode == "pid" and b4.genes.is_pid
    assert b4.genes.Kp == 6.52483


def test_blank_orders_mean_pid():
    rows = read_gene_rows(["Kp,Ki,Kd,lambda,mu", "1,2,3,,", "1,2,3,0.5,1.2"])
    assert [r.mode for r in rows] == ["pid", "fopid"]
    assert [r.label for r in rows] == ["row1", "row2"]


def test_missing_columns():
    with pytest.raises(ValueError):
        read_gene_rows(["Kp,Ki", "1,2"])


def test_unknown_label():
    with pytest.raises(KeyError):
        table_row(1, "Z9")
