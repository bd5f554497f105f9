import pytest


@pytest.fixture
def scenario_file(tmp_path):
    """Write scenario YAML to a temp file and return its path."""
    counter = {"n": 0}

    def write(text: str) -> str:
        counter["n"] += 1
        path = tmp_path / f"scenario{counter['n']}.yaml"
        path.write_text(text)
        return str(path)

    return write
