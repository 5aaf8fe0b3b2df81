from cbs.cli import main

main(prog_name="cbs")
