"""Tests for output cleanup."""
import os
import time


def test_cleanup_removes_csvs_and_run_dirs(cleanup_service, outputs_dir):
    (outputs_dir / 'chain.csv').write_text('iter,accepted,x1\n1,1,0.5\n')
    (outputs_dir / 'notes.txt').write_text('kept')
    run_dir = outputs_dir / 'sphere-extrinsic'
    run_dir.mkdir()
    (run_dir / 'coverage.csv').write_text('target\n')

    assert cleanup_service.cleanup_everything() == 2
    assert not (outputs_dir / 'chain.csv').exists()
    assert not run_dir.exists()
    assert (outputs_dir / 'notes.txt').exists()


def test_keep_latest(cleanup_service, outputs_dir):
    old, new = outputs_dir / 'old.csv', outputs_dir / 'new.csv'
    old.write_text('a\n')
    new.write_text('b\n')
    past = time.time() - 100
    os.utime(old, (past, past))
    assert cleanup_service.cleanup_outputs(keep_latest=True) == 1
    assert new.exists() and not old.exists()


def test_missing_directory(tmp_path):
    from src.services.cleanup_service import CleanupService

    assert CleanupService(str(tmp_path / 'absent')).cleanup_everything() == 0
