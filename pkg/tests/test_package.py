import pytest

from ssl_label_selection import __version__
from ssl_label_selection.cli import main


def test_version():
    assert __version__ == '0.1.0'


def test_cli_reports_package_version(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(['--version'])
    assert exit_info.value.code == 0
    assert capsys.readouterr().out.strip() == f'ssl-label-selection {__version__}'
