from dynrepset.main import run

run()
