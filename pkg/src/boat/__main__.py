from boat.cli import entry

entry()
