import numpy as np

from app.config import make_config
from app.models import SUSPENSION, ChainWitness, CheckRecord, VerificationReport
from app.output import file_header, format_complex, format_float, render, write_witness


def test_float_formats():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2"
    assert format_float(None) == "-"
    assert format_complex(complex(1.0, -2.0)) == "1 - 2i"
    assert format_complex(complex(0.5, 0.0)) == "0.5 + 0i"


def test_header_names_version_hash_and_seed():
    config = make_config({"builtin": "zero", "seed": 9})
    lines = file_header(config).splitlines()
    assert len(lines) == 3
    assert lines[1] == f"# config-hash: {config.config_hash()}"
    assert lines[2] == "# seed: 9"


def test_verification_report_layout():
    config = make_config({"builtin": "zero"})
    report = VerificationReport(theorem_id="prop-stable", system="zero", fiber="sphere(n=2)", seed=42, records=[
        CheckRecord(name="stable set of x0", inputs={"s": 0.5}, verdict="pass"),
        CheckRecord(name="stable set of x1", residual=0.25, bound=1.0, tolerance=1e-9, verdict="not-observed",
                    detail="left the region"),
    ])
    text = render("verification_report.txt.j2", config, reports=[report])
    assert "[prop-stable] system=zero fiber=sphere(n=2) seed=42" in text
    assert "-- check 2: stable set of x1" in text
    assert "residual: 0.25" in text
    assert "tolerance: 1.0000000000000001e-09" in text
    assert "detail: left the region" in text
    assert text.rstrip().endswith("THEOREM prop-stable PASS checks=2 failures=0 seed=42")


def test_witness_dump(tmp_path):
    config = make_config({"builtin": "zero", "output_dir": str(tmp_path)})
    witness = ChainWitness(points=np.array([[0.5, 1.0, 0.0], [0.5, 1.0, 0.0]]), times=np.array([3.0]), t_min=0.0,
                           residuals=np.array([0.0]), bounds=np.array([0.01]), space_tag=SUSPENSION)
    path = write_witness(config, "witness.txt", "closed chain", witness, {"n_min": 1})
    with open(path) as f:
        text = f.read()
    assert "closed chain\nspace: suspension\nsteps: 1\n" in text
    assert "n_min: 1" in text
    assert "step,s,x1,x2,time,residual,bound" in text
