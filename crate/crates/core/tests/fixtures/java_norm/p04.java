public class ArrayWalk {
    public static void main(String[] args) {
        int[] cells = new int[8];
        for (int index = 0; index < cells.length; index++) {
            cells[index] = index * 3;
        }
        int last = cells[7];
        System.out.println(last);
    }
}
