import pytest

TRACE_HEADER = "grad_evals,epoch_equiv,wall_s,suboptimality,dist_sq,lyapunov"
TUNE_HEADER = "b,alpha,loop_m,complexity"


@pytest.fixture
def write_trace(tmp_path):
    def _write(name, rows, header=TRACE_HEADER):
        path = tmp_path / name
        path.write_text("\n".join([header, *rows]) + "\n")
        return path
    return _write


@pytest.fixture
def write_tune(tmp_path):
    def _write(name, rows, header=TUNE_HEADER):
        path = tmp_path / name
        path.write_text("\n".join([header, *rows]) + "\n")
        return path
    return _write
